#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsvlm/corpus.hpp"
#include "tsvlm/prompt.hpp"
#include "tsvlm/render.hpp"
#include "tsvlm/scenario.hpp"

namespace tsvlm {

inline constexpr std::size_t kLoraR = 128;
inline constexpr std::size_t kLoraAlpha = 256;
inline constexpr std::string_view kModelName = "llava-1.5";
inline constexpr std::string_view kImageToken = "<image>";

std::string_view tool_version() noexcept;

struct GenerationOptions {
    SplitRatios ratios;
    bool strict_stratification = true;
    // In-context exemplars per prompt, 0 or 1.
    std::size_t exemplars = 0;
    int precision = kDefaultPrecision;
    std::size_t reserve = kDefaultReserveTokens;
    std::size_t entropy_bins = kDefaultEntropyBins;
    // plot_type is taken from the scenario.
    RenderConfig render;
    // Plot the raw series instead of the downsampled values used in the text.
    bool plot_full_signal = false;
    std::size_t workers = 1;
    TokenEstimator estimator = estimate_tokens;
    // Recorded in the manifest; change it when swapping the estimator.
    std::string estimator_name = "bytes/4";
};

struct VqaRecord {
    std::string id;
    std::string image;
    std::string question;
    std::string answer;

    bool operator==(const VqaRecord&) const = default;
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    bool operator==(const SplitCounts&) const = default;
};

struct RunManifest {
    std::string dataset;
    std::string scenario_id;
    std::uint64_t seed = 0;
    SplitCounts split_sizes;
    SplitCounts record_counts;
    std::size_t skipped = 0;
    std::string generated_at;
    std::string tool_version;
    std::size_t epochs = 0;
    std::size_t lora_r = kLoraR;
    std::size_t lora_alpha = kLoraAlpha;
    std::size_t context_length = 0;
    bool plot_full_signal = false;
    std::string inputs_fingerprint;
    std::string digest;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(std::string_view bytes);

// Downsampled values, factor and finished prompt for one sample.
struct SamplePlan {
    std::size_t factor = 1;
    std::vector<std::vector<double>> values;
    PromptRecord prompt;
};

// Chooses the minimal factor whose complete question (including the exemplar,
// if any) satisfies estimated_tokens <= context_length - reserve. Throws
// BudgetError when no factor fits.
SamplePlan plan_sample(const TimeSeries& s, const Scenario& scenario, const GenerationOptions& options,
                       const PromptRecord* exemplar = nullptr);

// One JSON object per line: {"id","image","conversations":[human, gpt]}.
std::string emit_jsonl(std::span<const VqaRecord> records);
std::vector<VqaRecord> parse_jsonl(std::string_view bytes);

// <outroot>/<dataset>/<scenario_id>
std::filesystem::path run_directory(const std::filesystem::path& outroot, std::string_view dataset,
                                    const Scenario& s);

// Writes {train,val,test}.jsonl, images/, manifest.json, training_config.json
// and run.log into outdir. A completed outdir with matching inputs and digest
// is left untouched.
RunManifest generate_experiment(const Dataset& d, const Split& split, const Scenario& s,
                                const std::filesystem::path& outdir, const GenerationOptions& options = {});

// The manifest of a completed run whose on-disk artifacts still hash to its
// digest; nullopt otherwise.
std::optional<RunManifest> load_completed_manifest(const std::filesystem::path& outdir);

enum class RunStatus { Ok, Skipped, Failed };
std::string_view to_string(RunStatus s) noexcept;

struct RunResult {
    std::string dataset;
    std::string scenario_id;
    RunStatus status = RunStatus::Ok;
    std::optional<RunManifest> manifest;
    std::string error;
};

// dataset x scenario in declaration order. Completed runs are skipped, a
// failing run is recorded and the loop continues. Writes <outroot>/runs.log.
std::vector<RunResult> run_all(std::span<const Dataset> datasets, std::span<const Scenario> scenarios,
                               const std::filesystem::path& outroot, const GenerationOptions& options = {});

} // namespace tsvlm
