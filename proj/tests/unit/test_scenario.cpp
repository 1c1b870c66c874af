#include <gtest/gtest.h>

#include <set>

#include "tsvlm/errors.hpp"
#include "tsvlm/scenario.hpp"

using namespace tsvlm;

TEST(ExpandGrid, TwoByTwo) {
    const ScenarioGrid g{{{"context_length", {"2048", "4096"}}, {"downsampling", {"uniform", "adaptive"}}}};
    const auto s = expand_grid(g);
    ASSERT_EQ(s.size(), 4u);
    EXPECT_EQ(s[0].context_length, 2048u);
    EXPECT_EQ(s[0].downsampling, Strategy::Uniform);
    EXPECT_EQ(s[1].downsampling, Strategy::Adaptive);
    EXPECT_EQ(s[2].context_length, 4096u);
}

TEST(ExpandGrid, DefaultGridSixteenDistinct) {
    const auto s = expand_grid(default_grid());
    ASSERT_EQ(s.size(), 16u);
    std::set<std::string> ids;
    for (const auto& x : s) {
        ids.insert(scenario_id(x));
        EXPECT_EQ(x.epochs, 2u);
    }
    EXPECT_EQ(ids.size(), 16u);
    EXPECT_EQ(scenario_id(s.front()), "ctx2048_uniform_line_baseline_ep2_s0");
    EXPECT_EQ(scenario_id(s.back()), "ctx4096_adaptive_scatter_with_stats_ep2_s0");
}

TEST(ExpandGrid, EmptyAxisNamesIt) {
    ScenarioGrid g = default_grid();
    g.axes[2].values.clear();
    try {
        expand_grid(g);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_STREQ(e.what(), "plot_type");
    }
}

TEST(ExpandGrid, Rejects) {
    EXPECT_THROW(expand_grid({{{"context_length", {"1"}}, {"context_length", {"2"}}}}), ConfigError);
    EXPECT_THROW(expand_grid({{{"colour", {"red"}}}}), ConfigError);
    EXPECT_THROW(expand_grid({{{"epochs", {"0"}}}}), ConfigError);
    EXPECT_THROW(expand_grid({{{"plot_type", {"bar"}}}}), ConfigError);
    EXPECT_THROW(expand_grid({{{"window", {"1"}}}}), ConfigError);
}

TEST(ExpandGrid, CardinalityProperty) {
    const std::vector<GridAxis> pool{{"context_length", {"1024", "2048", "4096"}},
                                     {"downsampling", {"uniform", "adaptive"}},
                                     {"plot_type", {"line", "scatter"}},
                                     {"prompt_mode", {"baseline", "with_stats"}},
                                     {"epochs", {"1", "2", "3", "5"}},
                                     {"seed", {"0", "1", "2"}},
                                     {"window", {"10", "20"}},
                                     {"threshold", {"0", "0.5"}}};
    for (unsigned mask = 1; mask < (1u << pool.size()); mask += 7) {
        ScenarioGrid g;
        std::size_t product = 1;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (mask & (1u << i)) {
                g.axes.push_back(pool[i]);
                product *= pool[i].values.size();
            }
        }
        const auto s = expand_grid(g);
        ASSERT_EQ(s.size(), product);
        ASSERT_EQ(expand_grid(g), s);
        std::set<std::string> ids;
        for (const auto& x : s) {
            ids.insert(scenario_id(x));
            ASSERT_EQ(parse_scenario_id(scenario_id(x)), x);
        }
        ASSERT_EQ(ids.size(), s.size());
    }
}

TEST(ScenarioId, Format) {
    Scenario s;
    s.context_length = 2048;
    s.downsampling = Strategy::Adaptive;
    s.plot_type = PlotType::Line;
    s.prompt_mode = PromptMode::Baseline;
    s.epochs = 2;
    s.seed = 7;
    EXPECT_EQ(scenario_id(s), "ctx2048_adaptive_line_baseline_ep2_s7");
    s.window = 20;
    s.threshold = 0.25;
    EXPECT_EQ(scenario_id(s), "ctx2048_adaptive_line_baseline_ep2_s7_w20_t0.25");
    EXPECT_EQ(parse_scenario_id(scenario_id(s)), s);
    EXPECT_THROW(parse_scenario_id("ctx2048_bogus"), ConfigError);
}

TEST(GridToml, DeclarationOrder) {
    const auto g = parse_grid_toml(R"(
prompt_mode = ["baseline", "with_stats"]
context_length = [2048]
downsampling = "adaptive"
threshold = [0.0, 0.5]
)");
    ASSERT_EQ(g.axes.size(), 4u);
    EXPECT_EQ(g.axes[0].name, "prompt_mode");
    EXPECT_EQ(g.axes[1].name, "context_length");
    EXPECT_EQ(g.axes[2].values, (std::vector<std::string>{"adaptive"}));
    EXPECT_EQ(g.axes[3].values, (std::vector<std::string>{"0", "0.5"}));
    const auto s = expand_grid(g);
    ASSERT_EQ(s.size(), 4u);
    EXPECT_EQ(s[0].prompt_mode, PromptMode::Baseline);
    EXPECT_EQ(s[1].threshold, 0.5);
}

TEST(GridToml, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_grid_toml("contxt_length = [2048]"), ConfigError);
    EXPECT_THROW(parse_grid_toml("context_length = [2048"), ConfigError);
    EXPECT_THROW(parse_grid_toml("epochs = [true]"), ConfigError);
    EXPECT_THROW(parse_grid_toml("seed = [-1]"), ConfigError);
}

TEST(ScenariosJson, RoundTrip) {
    const auto s = expand_grid(default_grid());
    EXPECT_EQ(scenarios_from_json(scenarios_to_json(s)), s);
    EXPECT_THROW(scenarios_from_json(R"([{"id":"wrong","context_length":2048,"downsampling":"uniform",
        "plot_type":"line","prompt_mode":"baseline","epochs":2}])"),
                 ConfigError);
    EXPECT_THROW(scenarios_from_json("{"), ConfigError);
}
