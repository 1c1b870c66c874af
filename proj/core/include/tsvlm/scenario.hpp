#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tsvlm/downsample.hpp"
#include "tsvlm/prompt.hpp"
#include "tsvlm/render.hpp"

namespace tsvlm {

inline constexpr std::size_t kDefaultWindow = 10;
inline constexpr double kDefaultThreshold = 0.0;

struct Scenario {
    std::size_t context_length = 2048;
    Strategy downsampling = Strategy::Uniform;
    PlotType plot_type = PlotType::Line;
    PromptMode prompt_mode = PromptMode::Baseline;
    std::size_t epochs = 2;
    std::size_t window = kDefaultWindow;
    double threshold = kDefaultThreshold;
    std::uint64_t seed = 0;

    bool operator==(const Scenario&) const = default;
};

// Axis values are kept textual ("2048", "adaptive", "0.5") and parsed during
// expansion. Known axis names: context_length, downsampling, plot_type,
// prompt_mode, epochs, window, threshold, seed. Undeclared axes keep the
// Scenario defaults.
struct GridAxis {
    std::string name;
    std::vector<std::string> values;
};

struct ScenarioGrid {
    std::vector<GridAxis> axes;
};

// 2 context lengths x 2 downsampling x 2 plot types x 2 prompt modes x 1 epochs.
ScenarioGrid default_grid();

// Cartesian product; the first declared axis varies slowest.
std::vector<Scenario> expand_grid(const ScenarioGrid& g);

// "ctx2048_adaptive_line_baseline_ep2_s7". A "_w<window>_t<threshold>" suffix
// is appended when either adaptive parameter differs from its default.
std::string scenario_id(const Scenario& s);
Scenario parse_scenario_id(std::string_view id);

// TOML grid: top-level keys are axes, each an array (or a scalar for a single
// value). Unknown keys are rejected. Declaration order is preserved.
ScenarioGrid parse_grid_toml(std::string_view text);
ScenarioGrid load_grid_toml(const std::filesystem::path& path);

std::string scenarios_to_json(const std::vector<Scenario>& scenarios);
std::vector<Scenario> scenarios_from_json(std::string_view bytes);

} // namespace tsvlm
