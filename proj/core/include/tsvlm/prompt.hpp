#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsvlm/corpus.hpp"
#include "tsvlm/stats.hpp"

namespace tsvlm {

enum class PromptMode { Baseline, WithStats };

std::string_view to_string(PromptMode m) noexcept;
PromptMode parse_prompt_mode(std::string_view s);

inline constexpr std::string_view kQuestionLine = "Which class is the following signal from?";
inline constexpr std::string_view kAnswerCue = "Class:";
inline constexpr int kDefaultPrecision = 4;

struct PromptRecord {
    std::string source_id;
    std::string question;
    std::string answer;
    std::size_t estimated_tokens = 0;
};

using TokenEstimator = std::function<std::size_t(std::string_view)>;

// ceil(bytes / 4). Swap in an exact tokenizer through TokenEstimator.
std::size_t estimate_tokens(std::string_view text);

// Values joined by ", ". Integral values have no decimal point; others are
// fixed `precision` decimals with trailing zeros stripped.
std::string render_values(std::span<const double> x, int precision = kDefaultPrecision);

// "Mean:4.5 Variance:6.9167 StdDev:... Min:... Max:... Skewness:... Kurtosis:... Entropy:..."
std::string render_stats(const SummaryStats& s, int precision = kDefaultPrecision);

// "One" .. "Ten", then decimal numerals.
std::string dimension_name(std::size_t index);

struct PromptOptions {
    int precision = kDefaultPrecision;
    TokenEstimator estimator = estimate_tokens;
};

// Builds the question for an (already downsampled) series. WithStats requires
// one SummaryStats per dimension.
PromptRecord build_prompt(const TimeSeries& s, PromptMode mode,
                          std::optional<std::span<const SummaryStats>> stats = std::nullopt,
                          const PromptOptions& options = {});

// exemplar.question + " " + exemplar.answer + "\n\n" + target.question.
PromptRecord attach_exemplar(const PromptRecord& target, const PromptRecord& exemplar,
                             const TokenEstimator& estimator = estimate_tokens);

// Inverse of the value lines of build_prompt: recovers the dims x timesteps
// matrix of the last signal in `question` (after any exemplar). Statistics
// suffixes are ignored. Throws ParseError on malformed text.
std::vector<std::vector<double>> parse_prompt_values(std::string_view question);

} // namespace tsvlm
