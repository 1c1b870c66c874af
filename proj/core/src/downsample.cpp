#include "tsvlm/downsample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tsvlm/errors.hpp"

namespace tsvlm {

std::string_view to_string(Strategy s) noexcept {
    return s == Strategy::Uniform ? "uniform" : "adaptive";
}

Strategy parse_strategy(std::string_view s) {
    if (s == "uniform") {
        return Strategy::Uniform;
    }
    if (s == "adaptive") {
        return Strategy::Adaptive;
    }
    throw ConfigError("unknown downsampling strategy '" + std::string(s) + "'");
}

void DownsampleConfig::validate() const {
    if (factor == 0) {
        throw ConfigError("downsampling factor must be >= 1");
    }
    if (strategy == Strategy::Adaptive && window < 2) {
        throw ConfigError("adaptive window must be >= 2");
    }
    if (!(threshold >= 0.0)) {
        throw ConfigError("adaptive threshold must be >= 0");
    }
}

std::vector<std::size_t> uniform_indices(std::size_t n, std::size_t factor) {
    if (factor == 0) {
        throw ConfigError("downsampling factor must be >= 1");
    }
    std::vector<std::size_t> idx;
    idx.reserve((n + factor - 1) / factor);
    for (std::size_t i = 0; i < n; i += factor) {
        idx.push_back(i);
    }
    return idx;
}

std::vector<double> uniform_downsample(std::span<const double> x, std::size_t factor) {
    std::vector<double> out;
    for (auto i : uniform_indices(x.size(), factor)) {
        out.push_back(x[i]);
    }
    return out;
}

namespace {

double population_stddev(std::span<const double> w) {
    const double n = static_cast<double>(w.size());
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : w) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / n);
}

std::size_t window_size(std::size_t i, std::size_t n, std::size_t w) {
    return std::min((i + 1) * w, n) - i * w;
}

// Window indices by descending variability, ties -> lower index.
std::vector<std::size_t> rank_windows(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    return order;
}

} // namespace

VariabilityProfile window_variability(std::span<const double> x, std::size_t window) {
    if (window < 2) {
        throw ConfigError("variability window must be >= 2");
    }
    if (x.empty()) {
        throw ConfigError("variability of an empty sequence");
    }
    VariabilityProfile p;
    p.window = window;
    const std::size_t windows = (x.size() + window - 1) / window;
    p.per_window.reserve(windows);
    for (std::size_t i = 0; i < windows; ++i) {
        p.per_window.push_back(population_stddev(x.subspan(i * window, window_size(i, x.size(), window))));
    }
    return p;
}

std::vector<std::size_t> adaptive_quotas(const VariabilityProfile& profile, std::size_t n, std::size_t target_len,
                                         double threshold) {
    const auto& v = profile.per_window;
    const std::size_t windows = v.size();
    if (profile.window < 2 || windows != (n + profile.window - 1) / profile.window) {
        throw ConfigError("variability profile does not match the series length");
    }
    if (target_len < 1) {
        throw ConfigError("adaptive target length must be >= 1");
    }
    if (target_len > n) {
        throw ConfigError("adaptive target length exceeds series length");
    }
    const auto ranked = rank_windows(v);
    std::vector<std::size_t> quota(windows, 0);

    if (target_len < windows) {
        for (std::size_t r = 0; r < target_len; ++r) {
            quota[ranked[r]] = 1;
        }
        return quota;
    }

    std::vector<double> effective(windows);
    for (std::size_t i = 0; i < windows; ++i) {
        effective[i] = std::max(v[i], threshold);
    }
    const double total = std::accumulate(effective.begin(), effective.end(), 0.0);
    const double target = static_cast<double>(target_len);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < windows; ++i) {
        const double weight = total > 0.0 ? effective[i] / total : 1.0 / static_cast<double>(windows);
        quota[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(target * weight)));
        assigned += quota[i];
    }

    // The one-point floor can overshoot; take the excess back from the largest
    // quotas (ties -> the less variable window) without dropping below one.
    while (assigned > target_len) {
        std::size_t pick = ranked.front();
        for (auto i : ranked) {
            if (quota[i] >= quota[pick]) {
                pick = i;
            }
        }
        --quota[pick];
        --assigned;
    }

    for (std::size_t r = 0; assigned < target_len; r = (r + 1) % windows) {
        const auto i = ranked[r];
        if (quota[i] < window_size(i, n, profile.window)) {
            ++quota[i];
            ++assigned;
        }
    }

    // Cap at window capacity; overflow goes to the highest-ranked window with room.
    std::size_t overflow = 0;
    for (std::size_t i = 0; i < windows; ++i) {
        const auto cap = window_size(i, n, profile.window);
        if (quota[i] > cap) {
            overflow += quota[i] - cap;
            quota[i] = cap;
        }
    }
    for (std::size_t r = 0; overflow > 0; r = (r + 1) % windows) {
        const auto i = ranked[r];
        const auto room = window_size(i, n, profile.window) - quota[i];
        const auto take = std::min(room, overflow);
        quota[i] += take;
        overflow -= take;
    }
    return quota;
}

std::vector<std::size_t> adaptive_indices(const VariabilityProfile& profile, std::size_t n, std::size_t target_len,
                                          double threshold) {
    const auto quota = adaptive_quotas(profile, n, target_len, threshold);
    std::vector<std::size_t> idx;
    idx.reserve(target_len);
    for (std::size_t i = 0; i < quota.size(); ++i) {
        const std::size_t start = i * profile.window;
        const std::size_t size = window_size(i, n, profile.window);
        for (std::size_t j = 0; j < quota[i]; ++j) {
            idx.push_back(start + j * size / quota[i]);
        }
    }
    return idx;
}

std::vector<double> adaptive_downsample(std::span<const double> x, const DownsampleConfig& cfg) {
    if (cfg.strategy != Strategy::Adaptive) {
        throw ConfigError("adaptive_downsample requires the adaptive strategy");
    }
    cfg.validate();
    const std::size_t target_len = x.size() / cfg.factor;
    if (target_len < 1) {
        throw ConfigError("downsampling factor leaves no points");
    }
    const auto profile = window_variability(x, cfg.window);
    std::vector<double> out;
    out.reserve(target_len);
    for (auto i : adaptive_indices(profile, x.size(), target_len, cfg.threshold)) {
        out.push_back(x[i]);
    }
    return out;
}

std::vector<double> downsample(std::span<const double> x, const DownsampleConfig& cfg) {
    cfg.validate();
    return cfg.strategy == Strategy::Uniform ? uniform_downsample(x, cfg.factor) : adaptive_downsample(x, cfg);
}

std::vector<std::size_t> select_indices(const std::vector<std::vector<double>>& rows, const DownsampleConfig& cfg) {
    cfg.validate();
    if (rows.empty() || rows.front().empty()) {
        throw ConfigError("cannot downsample an empty series");
    }
    const std::size_t n = rows.front().size();
    if (cfg.strategy == Strategy::Uniform) {
        return uniform_indices(n, cfg.factor);
    }
    const std::size_t target_len = n / cfg.factor;
    if (target_len < 1) {
        throw ConfigError("downsampling factor leaves no points");
    }
    auto profile = window_variability(rows.front(), cfg.window);
    for (std::size_t d = 1; d < rows.size(); ++d) {
        const auto other = window_variability(rows[d], cfg.window);
        for (std::size_t i = 0; i < profile.per_window.size(); ++i) {
            profile.per_window[i] = std::max(profile.per_window[i], other.per_window[i]);
        }
    }
    return adaptive_indices(profile, n, target_len, cfg.threshold);
}

std::vector<std::vector<double>> downsample_rows(const std::vector<std::vector<double>>& rows,
                                                 const DownsampleConfig& cfg) {
    const auto idx = select_indices(rows, cfg);
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        std::vector<double> r;
        r.reserve(idx.size());
        for (auto i : idx) {
            r.push_back(row[i]);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::size_t minimal_fitting_factor(std::size_t n, const std::function<bool(std::size_t)>& fits) {
    if (n == 0) {
        throw BudgetError("cannot fit an empty series");
    }
    if (fits(1)) {
        return 1;
    }
    std::size_t failing = 1;
    std::size_t fitting = 0;
    for (std::size_t f = 2;; f *= 2) {
        const std::size_t probe = std::min(f, n);
        if (fits(probe)) {
            fitting = probe;
            break;
        }
        failing = probe;
        if (probe == n) {
            throw BudgetError("series of length " + std::to_string(n) + " does not fit the budget at any factor");
        }
    }
    while (fitting - failing > 1) {
        const std::size_t mid = failing + (fitting - failing) / 2;
        if (fits(mid)) {
            fitting = mid;
        } else {
            failing = mid;
        }
    }
    return fitting;
}

BudgetFit fit_to_budget(std::span<const double> x, std::size_t overhead_tokens, std::size_t context_length,
                        Strategy strategy, std::size_t window, double threshold, const SeriesTokenEstimator& estimator,
                        std::size_t reserve) {
    if (context_length <= overhead_tokens + reserve) {
        throw BudgetError("context length " + std::to_string(context_length) + " leaves no room after " +
                          std::to_string(overhead_tokens) + " overhead and " + std::to_string(reserve) +
                          " reserved tokens");
    }
    const std::size_t budget = context_length - reserve;
    DownsampleConfig cfg{strategy, 1, window, threshold};
    auto at = [&](std::size_t f) {
        cfg.factor = f;
        return downsample(x, cfg);
    };
    const auto f = minimal_fitting_factor(x.size(), [&](std::size_t f) {
        return estimator(at(f)) + overhead_tokens <= budget;
    });
    return {at(f), f};
}

} // namespace tsvlm
