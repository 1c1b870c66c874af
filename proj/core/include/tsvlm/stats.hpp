#pragma once

#include <cstddef>
#include <span>

namespace tsvlm {

inline constexpr std::size_t kDefaultEntropyBins = 10;

// Population moments. Kurtosis is excess kurtosis.
struct SummaryStats {
    double mean = 0.0;
    double variance = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
    double entropy = 0.0;
};

// Zero-variance input yields skewness = kurtosis = entropy = 0.
SummaryStats summary_stats(std::span<const double> x, std::size_t entropy_bins = kDefaultEntropyBins);

// Shannon entropy (natural log) of bin occupancy over `bins` equal-width bins
// spanning [min, max]. The max value falls in the last bin.
double histogram_entropy(std::span<const double> x, std::size_t bins = kDefaultEntropyBins);

} // namespace tsvlm
