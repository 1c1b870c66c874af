#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace tsvlm {

enum class Strategy { Uniform, Adaptive };

std::string_view to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view s);

struct DownsampleConfig {
    Strategy strategy = Strategy::Uniform;
    std::size_t factor = 1;
    std::size_t window = 10;
    double threshold = 0.0;

    // Throws ConfigError when factor == 0, window < 2 (adaptive) or threshold < 0.
    void validate() const;
};

struct VariabilityProfile {
    std::vector<double> per_window;
    std::size_t window = 0;
};

// Tokens withheld from the context budget for template text, exemplar and answer.
inline constexpr std::size_t kDefaultReserveTokens = 256;

std::vector<double> uniform_downsample(std::span<const double> x, std::size_t factor);
std::vector<std::size_t> uniform_indices(std::size_t n, std::size_t factor);

// Population standard deviation of consecutive windows x[i*w, min((i+1)*w, n)).
VariabilityProfile window_variability(std::span<const double> x, std::size_t window);

// Number of points each window keeps. Quota rule:
//   effective_i = max(v_i, tau), weight_i = effective_i / sum(effective)
//   quota_i = max(1, floor(target * weight_i))
// then the remainder is handed out one point at a time in descending
// variability order (ties -> lower index), quotas are capped at window size
// with overflow passed to the next-ranked window. When target < windows, the
// `target` most variable windows get one point each.
std::vector<std::size_t> adaptive_quotas(const VariabilityProfile& profile, std::size_t n,
                                         std::size_t target_len, double threshold);

// Sorted sample indices chosen by the quota rule; each window is sampled by
// uniform stride from its first element.
std::vector<std::size_t> adaptive_indices(const VariabilityProfile& profile, std::size_t n,
                                          std::size_t target_len, double threshold);

std::vector<double> adaptive_downsample(std::span<const double> x, const DownsampleConfig& cfg);

// Dispatch on cfg.strategy.
std::vector<double> downsample(std::span<const double> x, const DownsampleConfig& cfg);

// Shared index selection for a multivariate series: the adaptive profile is
// the per-window maximum over dimensions so all rows stay time aligned.
std::vector<std::size_t> select_indices(const std::vector<std::vector<double>>& rows,
                                        const DownsampleConfig& cfg);
std::vector<std::vector<double>> downsample_rows(const std::vector<std::vector<double>>& rows,
                                                 const DownsampleConfig& cfg);

// Smallest factor in [1, n] for which `fits` holds, found by doubling and then
// bisecting between the last failing and first fitting factor. The result f
// satisfies fits(f) and, for f > 1, !fits(f - 1). Throws BudgetError if even
// f = n does not fit.
std::size_t minimal_fitting_factor(std::size_t n, const std::function<bool(std::size_t)>& fits);

// Token cost of a serialized value sequence.
using SeriesTokenEstimator = std::function<std::size_t(std::span<const double>)>;

struct BudgetFit {
    std::vector<double> values;
    std::size_t factor = 1;
};

// Downsamples `x` with the smallest factor such that
// estimator(values) + overhead_tokens <= context_length - reserve.
BudgetFit fit_to_budget(std::span<const double> x, std::size_t overhead_tokens,
                        std::size_t context_length, Strategy strategy, std::size_t window,
                        double threshold, const SeriesTokenEstimator& estimator,
                        std::size_t reserve = kDefaultReserveTokens);

} // namespace tsvlm
