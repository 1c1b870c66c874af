#include "tsvlm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tsvlm/errors.hpp"

namespace tsvlm {

double histogram_entropy(std::span<const double> x, std::size_t bins) {
    if (x.empty()) {
        throw EmptyInput("entropy of an empty sequence");
    }
    if (bins == 0) {
        throw ConfigError("entropy needs at least one bin");
    }
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (!(range > 0.0)) {
        return 0.0;
    }
    std::vector<std::size_t> counts(bins, 0);
    for (double v : x) {
        auto b = static_cast<std::size_t>((v - lo) / range * static_cast<double>(bins));
        ++counts[std::min(b, bins - 1)];
    }
    const double n = static_cast<double>(x.size());
    double h = 0.0;
    for (auto c : counts) {
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
        }
    }
    return std::max(h, 0.0);
}

SummaryStats summary_stats(std::span<const double> x, std::size_t entropy_bins) {
    if (x.empty()) {
        throw EmptyInput("summary statistics of an empty sequence");
    }
    SummaryStats s;
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    s.min = *lo_it;
    s.max = *hi_it;
    const double n = static_cast<double>(x.size());
    if (s.min == s.max) {
        s.mean = s.min;
        return s;
    }
    double sum = 0.0;
    for (double v : x) {
        sum += v;
    }
    s.mean = std::clamp(sum / n, s.min, s.max);

    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double v : x) {
        const double d = v - s.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    s.variance = m2;
    s.stddev = std::sqrt(m2);
    if (m2 > 0.0) {
        s.skewness = m3 / std::pow(m2, 1.5);
        s.kurtosis = m4 / (m2 * m2) - 3.0;
    }
    s.entropy = histogram_entropy(x, entropy_bins);
    return s;
}

} // namespace tsvlm
