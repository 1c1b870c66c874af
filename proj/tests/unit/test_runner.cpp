#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "tsvlm/errors.hpp"
#include "tsvlm/runner.hpp"
#include "tsvlm/stats.hpp"

using namespace tsvlm;
namespace fs = std::filesystem;
using fixtures::read_all;
using fixtures::TempDir;

namespace {

std::size_t line_count(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

Scenario small_scenario() {
    Scenario s;
    s.context_length = 2048;
    s.downsampling = Strategy::Adaptive;
    return s;
}

Dataset ten_samples() {
    return Dataset("ten", fixtures::random_series(10, 60, 1, 3));
}

} // namespace

TEST(EmitJsonl, SingleRecordExact) {
    const std::vector<VqaRecord> r{
        {"a", "images/a.png", "Which class is the following signal from?\n2, 3\nClass:", "1"}};
    EXPECT_EQ(emit_jsonl(r),
              "{\"id\":\"a\",\"image\":\"images/a.png\",\"conversations\":[{\"from\":\"human\",\"value\":\"<image>\\nWhich "
              "class is the following signal from?\\n2, 3\\nClass:\"},{\"from\":\"gpt\",\"value\":\"1\"}]}\n");
}

TEST(EmitJsonl, EmptyAndDuplicates) {
    EXPECT_EQ(emit_jsonl({}), "");
    const std::vector<VqaRecord> dup{{"a", "images/a.png", "q", "1"}, {"a", "images/a.png", "q", "2"}};
    EXPECT_THROW(emit_jsonl(dup), EmitError);
    const std::vector<VqaRecord> token{{"a", "images/a.png", "<image>\nq", "1"}};
    EXPECT_THROW(emit_jsonl(token), EmitError);
    const std::vector<VqaRecord> bad_utf8{{"a", "images/a.png", "q\xff", "1"}};
    EXPECT_THROW(emit_jsonl(bad_utf8), EmitError);
}

TEST(EmitJsonl, ParseBackProperty) {
    std::vector<VqaRecord> records;
    for (std::size_t i = 0; i < 50; ++i) {
        const auto id = fixtures::id_for("r", i);
        records.push_back({id, image_path(id), "Which class?\n\"quoted\" \\ " + std::to_string(i) + "\nClass:",
                           "labél" + std::to_string(i % 3)});
        const auto bytes = emit_jsonl(records);
        ASSERT_EQ(line_count(bytes), records.size());
        ASSERT_EQ(parse_jsonl(bytes), records);
    }
}

TEST(EmitJsonl, GoldenThreeRecords) {
    const auto path = fixtures::data_dir() / "golden_3.jsonl";
    const auto bytes = emit_jsonl(fixtures::golden_records());
    if (std::getenv("TSVLM_UPDATE_GOLDEN") != nullptr) {
        fixtures::write_all(path, bytes);
    }
    EXPECT_EQ(bytes, read_all(path));
}

TEST(Manifest, JsonRoundTrip) {
    RunManifest m;
    m.dataset = "d";
    m.scenario_id = "ctx2048_uniform_line_baseline_ep2_s0";
    m.split_sizes = {8, 1, 1};
    m.record_counts = {8, 1, 0};
    m.skipped = 1;
    m.epochs = 2;
    m.digest = "abc";
    const auto back = manifest_from_json(manifest_to_json(m));
    EXPECT_EQ(back.split_sizes, m.split_sizes);
    EXPECT_EQ(back.record_counts, m.record_counts);
    EXPECT_EQ(back.digest, "abc");
    EXPECT_EQ(back.lora_r, 128u);
    EXPECT_THROW(manifest_from_json("{}"), ParseError);
}

TEST(PlanSample, RespectsBudgetAndMinimality) {
    const TimeSeries s{"long", {std::vector<double>(3000, 0.1234)}, "x"};
    GenerationOptions o;
    for (auto strategy : {Strategy::Uniform, Strategy::Adaptive}) {
        for (auto mode : {PromptMode::Baseline, PromptMode::WithStats}) {
            Scenario sc = small_scenario();
            sc.downsampling = strategy;
            sc.prompt_mode = mode;
            const auto plan = plan_sample(s, sc, o);
            EXPECT_GT(plan.factor, 1u);
            EXPECT_LE(plan.prompt.estimated_tokens, 2048u - 256u);
            // f - 1 must overflow the budget.
            const TimeSeries reduced{"long", downsample_rows(s.values, {strategy, plan.factor - 1, 10, 0.0}), "x"};
            std::vector<SummaryStats> st{summary_stats(reduced.values[0])};
            const auto bigger = build_prompt(reduced, mode, st);
            EXPECT_GT(bigger.estimated_tokens, 2048u - 256u);
        }
    }
}

TEST(PlanSample, ContextNotAboveReserve) {
    Scenario sc = small_scenario();
    sc.context_length = 256;
    EXPECT_THROW(plan_sample({"a", {{1, 2}}, "x"}, sc, {}), BudgetError);
}

TEST(GenerateExperiment, CountsFilesAndTrainingConfig) {
    TempDir tmp("gen");
    const auto d = ten_samples();
    const auto split = stratified_split(d, {}, 0);
    const auto m = generate_experiment(d, split, small_scenario(), tmp.path());
    EXPECT_EQ(m.split_sizes, (SplitCounts{8, 1, 1}));
    EXPECT_EQ(m.record_counts, (SplitCounts{8, 1, 1}));
    EXPECT_EQ(line_count(read_all(tmp.path() / "train.jsonl")), 8u);
    EXPECT_EQ(line_count(read_all(tmp.path() / "val.jsonl")), 1u);
    EXPECT_EQ(line_count(read_all(tmp.path() / "test.jsonl")), 1u);
    std::size_t pngs = 0;
    for (const auto& e : fs::directory_iterator(tmp.path() / "images")) {
        pngs += e.path().extension() == ".png";
    }
    EXPECT_EQ(pngs, 10u);
    EXPECT_FALSE(fs::exists(tmp.path() / ".incomplete"));

    const auto cfg = nlohmann::json::parse(read_all(tmp.path() / "training_config.json"));
    EXPECT_EQ(cfg.at("epochs"), 2);
    EXPECT_EQ(cfg.at("lora_r"), 128);
    EXPECT_EQ(cfg.at("lora_alpha"), 256);
    EXPECT_EQ(cfg.at("model"), "llava-1.5");
    EXPECT_EQ(cfg.at("context_length"), 2048);

    const auto log = read_all(tmp.path() / "run.log");
    const auto first = nlohmann::json::parse(log.substr(0, log.find('\n')));
    for (const char* key : {"ts", "run", "phase", "status"}) {
        EXPECT_TRUE(first.contains(key)) << key;
    }

    // Every record's image exists and its question holds the placeholder once.
    std::set<std::string> seen;
    for (const char* name : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
        const auto bytes = read_all(tmp.path() / name);
        for (const auto& r : parse_jsonl(bytes)) {
            EXPECT_TRUE(fs::exists(tmp.path() / r.image));
            EXPECT_TRUE(seen.insert(r.id).second);
        }
        std::size_t placeholders = 0;
        for (std::size_t from = 0; (from = bytes.find("<image>", from)) != std::string::npos; ++from) {
            ++placeholders;
        }
        EXPECT_EQ(placeholders, line_count(bytes));
    }
    EXPECT_EQ(seen.size(), 10u);
}

TEST(GenerateExperiment, RerunIsNoOp) {
    TempDir tmp("rerun");
    const auto d = ten_samples();
    const auto split = stratified_split(d, {}, 0);
    const auto m1 = generate_experiment(d, split, small_scenario(), tmp.path());
    const auto stamp = fs::last_write_time(tmp.path() / "train.jsonl");
    const auto m2 = generate_experiment(d, split, small_scenario(), tmp.path());
    EXPECT_EQ(m1.digest, m2.digest);
    EXPECT_EQ(m1.generated_at, m2.generated_at);
    EXPECT_EQ(fs::last_write_time(tmp.path() / "train.jsonl"), stamp);
}

TEST(GenerateExperiment, DigestPerturbationMatrix) {
    const auto d = ten_samples();
    const auto split = stratified_split(d, {}, 0);
    auto digest = [](const Dataset& data, const Split& sp, const Scenario& s, const GenerationOptions& o = {}) {
        TempDir tmp("digest");
        return generate_experiment(data, sp, s, tmp.path(), o).digest;
    };
    const auto base = digest(d, split, small_scenario());
    EXPECT_EQ(digest(d, split, small_scenario()), base);

    auto series = d.series();
    series[3].values[0][5] += 1.0 / 16.0;
    EXPECT_NE(digest(Dataset("ten", series), split, small_scenario()), base);

    Scenario other = small_scenario();
    other.plot_type = PlotType::Scatter;
    EXPECT_NE(digest(d, split, other), base);

    Scenario seeded = small_scenario();
    seeded.seed = 1;
    EXPECT_NE(digest(d, stratified_split(d, {}, 1), seeded), base);

    GenerationOptions full;
    full.plot_full_signal = true;
    EXPECT_NE(digest(d, split, small_scenario(), full), base);
}

TEST(GenerateExperiment, WorkersDoNotChangeBytes) {
    TempDir a("w1");
    TempDir b("w8");
    const Dataset d("par", fixtures::random_series(40, 300, 3, 8, 2));
    const auto split = stratified_split(d, {}, 4);
    GenerationOptions serial;
    GenerationOptions parallel;
    parallel.workers = 8;
    const auto m1 = generate_experiment(d, split, small_scenario(), a.path(), serial);
    const auto m2 = generate_experiment(d, split, small_scenario(), b.path(), parallel);
    EXPECT_EQ(m1.digest, m2.digest);
    EXPECT_EQ(read_all(a.path() / "train.jsonl"), read_all(b.path() / "train.jsonl"));
}

TEST(GenerateExperiment, BudgetFailuresAreSkipped) {
    // Six dimensions and a 44-token budget: one-digit values fit at f=2, the
    // fifteen-digit sample cannot fit even one value per dimension.
    std::vector<TimeSeries> series;
    for (std::size_t i = 0; i < 10; ++i) {
        const double v = i == 4 ? 987654321000000.0 : static_cast<double>(i % 3);
        series.push_back({fixtures::id_for("b", i), std::vector<std::vector<double>>(6, {v, 1, 2, v}), "x"});
    }
    const Dataset d("budget", std::move(series));
    Scenario s = small_scenario();
    s.context_length = 300;
    s.downsampling = Strategy::Uniform;
    TempDir tmp("skip");
    const auto m = generate_experiment(d, stratified_split(d, {}, 0), s, tmp.path());
    EXPECT_EQ(m.skipped, 1u);
    EXPECT_EQ(m.record_counts.train + m.record_counts.val + m.record_counts.test, 9u);
    const auto log = read_all(tmp.path() / "run.log");
    EXPECT_NE(log.find("\"id\":\"b_0004\""), std::string::npos);
    EXPECT_NE(log.find("\"status\":\"skipped\""), std::string::npos);
}

TEST(GenerateExperiment, OneShotExemplarFromTrain) {
    TempDir tmp("ex");
    const auto d = ten_samples();
    const auto split = stratified_split(d, {}, 0);
    GenerationOptions o;
    o.exemplars = 1;
    generate_experiment(d, split, small_scenario(), tmp.path(), o);
    auto train_ids = split.train;
    std::sort(train_ids.begin(), train_ids.end());
    for (const char* name : {"train.jsonl", "test.jsonl"}) {
        for (const auto& r : parse_jsonl(read_all(tmp.path() / name))) {
            const auto& ex_id = r.id == train_ids[0] ? train_ids[1] : train_ids[0];
            const auto ex = build_prompt(d.at(ex_id), PromptMode::Baseline, std::nullopt);
            EXPECT_EQ(r.question.substr(0, r.question.find("\n\n")), ex.question + " " + ex.answer) << r.id;
            EXPECT_LE(estimate_tokens(r.question), 2048u - 256u);
        }
    }
    o.exemplars = 2;
    EXPECT_THROW(generate_experiment(d, split, small_scenario(), tmp.path() / "two", o), ConfigError);
}

TEST(RunAll, GridOfRunsWithFailureAndResume) {
    TempDir tmp("all");
    const std::vector<Dataset> datasets{
        Dataset("alpha", fixtures::random_series(12, 80, 2, 1)),
        Dataset("beta", fixtures::random_series(12, 80, 3, 2)),
        // Class c1 has two members: strict stratification fails this dataset.
        Dataset("gamma", {{"g0", {{1, 2}}, "c0"}, {"g1", {{1, 2}}, "c0"}, {"g2", {{1, 2}}, "c0"},
                          {"g3", {{2, 1}}, "c1"}, {"g4", {{2, 1}}, "c1"}}),
    };
    std::vector<Scenario> scenarios = expand_grid({{{"plot_type", {"line", "scatter"}}, {"seed", {"0"}}}});
    Scenario third = small_scenario();
    scenarios.push_back(third);

    const auto r1 = run_all(std::span(datasets).first(2), scenarios, tmp.path());
    ASSERT_EQ(r1.size(), 6u);
    std::size_t dirs = 0;
    for (const auto& ds : {"alpha", "beta"}) {
        for (const auto& e : fs::directory_iterator(tmp.path() / ds)) {
            dirs += e.is_directory();
        }
    }
    EXPECT_EQ(dirs, 6u);
    for (const auto& r : r1) {
        EXPECT_EQ(r.status, RunStatus::Ok) << r.error;
    }

    // Simulate a crash in one run and a corrupted image in another.
    const auto crashed = run_directory(tmp.path(), "alpha", scenarios[1]);
    fixtures::write_all(crashed / ".incomplete", "");
    const auto corrupted = run_directory(tmp.path(), "beta", scenarios[2]);
    const auto img = parse_jsonl(read_all(corrupted / "train.jsonl")).front().image;
    fixtures::write_all(corrupted / img, "garbage");

    const auto r2 = run_all(datasets, scenarios, tmp.path());
    ASSERT_EQ(r2.size(), 9u);
    std::size_t ok = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    for (const auto& r : r2) {
        ok += r.status == RunStatus::Ok;
        skipped += r.status == RunStatus::Skipped;
        failed += r.status == RunStatus::Failed;
    }
    EXPECT_EQ(ok, 2u);
    EXPECT_EQ(skipped, 4u);
    EXPECT_EQ(failed, 3u);
    EXPECT_EQ(r2[1].status, RunStatus::Ok);
    EXPECT_EQ(r2[5].status, RunStatus::Ok);
    EXPECT_NE(r2[6].error.find("c1"), std::string::npos);
    EXPECT_EQ(r2[1].manifest->digest, r1[1].manifest->digest);
    EXPECT_EQ(r2[5].manifest->digest, r1[5].manifest->digest);

    const auto log = read_all(tmp.path() / "runs.log");
    EXPECT_NE(log.find("\"status\":\"failed\""), std::string::npos);
    EXPECT_NE(log.find("\"status\":\"skipped\""), std::string::npos);
    EXPECT_NE(log.find("\"status\":\"ok\""), std::string::npos);
}
