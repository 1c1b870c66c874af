#include "tsvlm/prompt.hpp"

#include <array>
#include <cmath>

#include "detail.hpp"
#include "tsvlm/errors.hpp"

namespace tsvlm {

std::string_view to_string(PromptMode m) noexcept {
    return m == PromptMode::Baseline ? "baseline" : "with_stats";
}

PromptMode parse_prompt_mode(std::string_view s) {
    if (s == "baseline" || s == "BASELINE") {
        return PromptMode::Baseline;
    }
    if (s == "with_stats" || s == "WITH_STATS") {
        return PromptMode::WithStats;
    }
    throw ConfigError("unknown prompt mode '" + std::string(s) + "'");
}

std::size_t estimate_tokens(std::string_view text) {
    return (text.size() + 3) / 4;
}

std::string render_values(std::span<const double> x, int precision) {
    std::string out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        const double v = x[i];
        if (v == std::trunc(v) && std::abs(v) < 1e15) {
            out += std::to_string(static_cast<long long>(v));
        } else {
            out += detail::format_fixed(v, precision);
        }
    }
    return out;
}

std::string render_stats(const SummaryStats& s, int precision) {
    auto f = [precision](double v) { return detail::format_fixed(v, precision); };
    return "Mean:" + f(s.mean) + " Variance:" + f(s.variance) + " StdDev:" + f(s.stddev) + " Min:" + f(s.min) +
           " Max:" + f(s.max) + " Skewness:" + f(s.skewness) + " Kurtosis:" + f(s.kurtosis) +
           " Entropy:" + f(s.entropy);
}

std::string dimension_name(std::size_t index) {
    static constexpr std::array<std::string_view, 10> kWords{"One", "Two",   "Three", "Four", "Five",
                                                             "Six", "Seven", "Eight", "Nine", "Ten"};
    if (index >= 1 && index <= kWords.size()) {
        return std::string(kWords[index - 1]);
    }
    return std::to_string(index);
}

PromptRecord build_prompt(const TimeSeries& s, PromptMode mode, std::optional<std::span<const SummaryStats>> stats,
                          const PromptOptions& options) {
    if (s.dims() == 0) {
        throw ConfigError("cannot build a prompt for a series without dimensions");
    }
    if (mode == PromptMode::WithStats && (!stats || stats->size() != s.dims())) {
        throw ConfigError("WITH_STATS prompt needs summary statistics for every dimension");
    }
    std::string q(kQuestionLine);
    q += '\n';
    for (std::size_t d = 0; d < s.dims(); ++d) {
        if (s.dims() > 1) {
            q += "Dimension " + dimension_name(d + 1) + ": ";
        }
        q += render_values(s.values[d], options.precision);
        if (mode == PromptMode::WithStats) {
            q += ", " + render_stats((*stats)[d], options.precision);
        }
        q += '\n';
    }
    q += kAnswerCue;

    PromptRecord r;
    r.source_id = s.id;
    r.estimated_tokens = options.estimator(q);
    r.question = std::move(q);
    r.answer = s.label;
    return r;
}

PromptRecord attach_exemplar(const PromptRecord& target, const PromptRecord& exemplar,
                             const TokenEstimator& estimator) {
    if (!exemplar.source_id.empty() && exemplar.source_id == target.source_id) {
        throw ConfigError("exemplar '" + exemplar.source_id + "' is the target itself");
    }
    PromptRecord r = target;
    r.question = exemplar.question + " " + exemplar.answer + "\n\n" + target.question;
    r.estimated_tokens = estimator(r.question);
    return r;
}

std::vector<std::vector<double>> parse_prompt_values(std::string_view question) {
    if (const auto sep = question.rfind("\n\n"); sep != std::string_view::npos) {
        question.remove_prefix(sep + 2);
    }
    const auto lines = detail::split(question, '\n');
    std::size_t first = 0;
    while (first < lines.size() && lines[first] != kQuestionLine) {
        ++first;
    }
    if (first == lines.size()) {
        throw ParseError("prompt has no question line");
    }
    std::vector<std::vector<double>> rows;
    std::size_t i = first + 1;
    for (; i < lines.size() && lines[i] != kAnswerCue; ++i) {
        auto line = lines[i];
        if (line.starts_with("Dimension ")) {
            const auto colon = line.find(": ");
            if (colon == std::string_view::npos) {
                throw ParseError("malformed dimension line", i + 1);
            }
            line.remove_prefix(colon + 2);
        }
        std::vector<double> row;
        for (auto token : detail::split(line, ',')) {
            token = detail::trim(token);
            if (token.find(':') != std::string_view::npos) {
                break;
            }
            auto v = detail::parse_real(token);
            if (!v) {
                throw ParseError("non-numeric value '" + std::string(token) + "' in prompt", i + 1);
            }
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    if (i == lines.size()) {
        throw ParseError("prompt has no answer cue");
    }
    if (rows.empty()) {
        throw ParseError("prompt has no value lines");
    }
    return rows;
}

} // namespace tsvlm
