#include "tsvlm/runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "detail.hpp"
#include "tsvlm/downsample.hpp"
#include "tsvlm/errors.hpp"
#include "tsvlm/stats.hpp"

#ifndef TSVLM_VERSION
#define TSVLM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace tsvlm {

std::string_view tool_version() noexcept { return TSVLM_VERSION; }

std::string_view to_string(RunStatus s) noexcept {
    switch (s) {
    case RunStatus::Ok:
        return "ok";
    case RunStatus::Skipped:
        return "skipped";
    default:
        return "failed";
    }
}

namespace {

constexpr std::array<std::string_view, 3> kSplitNames{"train", "val", "test"};
constexpr std::string_view kMarker = ".incomplete";

ojson counts_json(const SplitCounts& c) {
    ojson j;
    j["train"] = c.train;
    j["val"] = c.val;
    j["test"] = c.test;
    return j;
}

SplitCounts counts_from(const nlohmann::json& j) {
    return {j.at("train").get<std::size_t>(), j.at("val").get<std::size_t>(), j.at("test").get<std::size_t>()};
}

ojson options_json(const GenerationOptions& o) {
    ojson j;
    j["ratios"] = {o.ratios.train, o.ratios.val, o.ratios.test};
    j["strict_stratification"] = o.strict_stratification;
    j["exemplars"] = o.exemplars;
    j["precision"] = o.precision;
    j["reserve"] = o.reserve;
    j["entropy_bins"] = o.entropy_bins;
    j["estimator"] = o.estimator_name;
    j["plot_full_signal"] = o.plot_full_signal;
    const auto& r = o.render;
    ojson render;
    render["width"] = r.width;
    render["height"] = r.height;
    render["stroke_width"] = r.stroke_width;
    render["point_radius"] = r.point_radius;
    render["margin"] = r.margin;
    render["background"] = {r.background.r, r.background.g, r.background.b};
    auto palette = ojson::array();
    for (const auto& c : r.series_palette) {
        palette.push_back({c.r, c.g, c.b});
    }
    render["palette"] = std::move(palette);
    render["layout"] = r.layout == PanelLayout::Overlay ? "overlay" : "stacked";
    j["render"] = std::move(render);
    return j;
}

ojson split_json(const Split& s) {
    ojson j;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    j["seed"] = s.seed;
    return j;
}

std::string inputs_fingerprint(const Dataset& d, const Split& split, const Scenario& s,
                               const GenerationOptions& options) {
    detail::Sha256 h;
    h.update(std::string("tool:") + std::string(tool_version()) + "\n");
    h.update("dataset:" + detail::sha256_hex(to_canonical_json(d)) + "\n");
    h.update("split:" + split_json(split).dump() + "\n");
    h.update("scenario:" + scenario_id(s) + "\n");
    h.update("options:" + options_json(options).dump() + "\n");
    return h.hex_digest();
}

void append_log(const fs::path& file, const std::string& run, std::string_view phase, std::string_view status,
                const ojson& extra = ojson::object()) {
    ojson j;
    j["ts"] = detail::utc_timestamp();
    j["run"] = run;
    j["phase"] = phase;
    j["status"] = status;
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        j[it.key()] = it.value();
    }
    std::ofstream out(file, std::ios::app | std::ios::binary);
    out << j.dump() << '\n';
}

// Hash over the tool version, the inputs fingerprint, every JSONL file and
// every referenced image, in split then record order.
std::optional<std::string> compute_digest(const fs::path& dir, const std::string& fingerprint) {
    detail::Sha256 h;
    h.update("tsvlm-digest\n" + std::string(tool_version()) + "\n" + fingerprint + "\n");
    for (auto name : kSplitNames) {
        const auto file = dir / (std::string(name) + ".jsonl");
        if (!fs::exists(file)) {
            return std::nullopt;
        }
        const std::string bytes = detail::read_file(file);
        h.update(std::string(name) + ".jsonl\n" + std::to_string(bytes.size()) + "\n");
        h.update(bytes);
        for (const auto& r : parse_jsonl(bytes)) {
            const auto image = dir / r.image;
            if (!fs::exists(image)) {
                return std::nullopt;
            }
            const std::string png = detail::read_file(image);
            h.update(r.image + "\n" + std::to_string(png.size()) + "\n");
            h.update(png);
        }
    }
    return h.hex_digest();
}

struct Job {
    std::size_t split;
    const TimeSeries* series;
};

struct JobResult {
    std::optional<VqaRecord> record;
    std::string skip_reason;
};

template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                fn(i);
            }
        });
    }
}

} // namespace

std::string manifest_to_json(const RunManifest& m) {
    ojson j;
    j["dataset"] = m.dataset;
    j["scenario_id"] = m.scenario_id;
    j["seed"] = m.seed;
    j["split_sizes"] = counts_json(m.split_sizes);
    j["record_counts"] = counts_json(m.record_counts);
    j["skipped"] = m.skipped;
    j["generated_at"] = m.generated_at;
    j["tool_version"] = m.tool_version;
    j["training"] = {{"epochs", m.epochs}, {"lora_r", m.lora_r}, {"lora_alpha", m.lora_alpha}};
    j["context_length"] = m.context_length;
    j["plot_full_signal"] = m.plot_full_signal;
    j["inputs_fingerprint"] = m.inputs_fingerprint;
    j["digest"] = m.digest;
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view bytes) {
    try {
        const auto j = nlohmann::json::parse(bytes);
        RunManifest m;
        m.dataset = j.at("dataset").get<std::string>();
        m.scenario_id = j.at("scenario_id").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.split_sizes = counts_from(j.at("split_sizes"));
        m.record_counts = counts_from(j.at("record_counts"));
        m.skipped = j.at("skipped").get<std::size_t>();
        m.generated_at = j.at("generated_at").get<std::string>();
        m.tool_version = j.at("tool_version").get<std::string>();
        m.epochs = j.at("training").at("epochs").get<std::size_t>();
        m.lora_r = j.at("training").at("lora_r").get<std::size_t>();
        m.lora_alpha = j.at("training").at("lora_alpha").get<std::size_t>();
        m.context_length = j.at("context_length").get<std::size_t>();
        m.plot_full_signal = j.at("plot_full_signal").get<bool>();
        m.inputs_fingerprint = j.at("inputs_fingerprint").get<std::string>();
        m.digest = j.at("digest").get<std::string>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
}

SamplePlan plan_sample(const TimeSeries& s, const Scenario& scenario, const GenerationOptions& options,
                       const PromptRecord* exemplar) {
    if (scenario.context_length <= options.reserve) {
        throw BudgetError("context length " + std::to_string(scenario.context_length) +
                          " does not exceed the reserved " + std::to_string(options.reserve) + " tokens");
    }
    const std::size_t budget = scenario.context_length - options.reserve;
    const PromptOptions prompt_options{options.precision, options.estimator};

    auto build = [&](std::size_t factor) {
        SamplePlan plan;
        plan.factor = factor;
        plan.values = downsample_rows(s.values, {scenario.downsampling, factor, scenario.window, scenario.threshold});
        TimeSeries reduced{s.id, plan.values, s.label};
        std::vector<SummaryStats> stats;
        if (scenario.prompt_mode == PromptMode::WithStats) {
            for (const auto& row : plan.values) {
                stats.push_back(summary_stats(row, options.entropy_bins));
            }
        }
        plan.prompt = build_prompt(reduced, scenario.prompt_mode,
                                   scenario.prompt_mode == PromptMode::WithStats
                                       ? std::optional<std::span<const SummaryStats>>(stats)
                                       : std::nullopt,
                                   prompt_options);
        if (exemplar != nullptr) {
            plan.prompt = attach_exemplar(plan.prompt, *exemplar, options.estimator);
        }
        return plan;
    };
    const auto factor = minimal_fitting_factor(s.timesteps(), [&](std::size_t f) {
        return build(f).prompt.estimated_tokens <= budget;
    });
    return build(factor);
}

std::string emit_jsonl(std::span<const VqaRecord> records) {
    std::unordered_set<std::string> ids;
    std::string out;
    for (const auto& r : records) {
        if (!ids.insert(r.id).second) {
            throw EmitError("duplicate record id '" + r.id + "'");
        }
        if (r.question.find(kImageToken) != std::string::npos) {
            throw EmitError("record '" + r.id + "' already contains the image placeholder");
        }
        ojson j;
        j["id"] = r.id;
        j["image"] = r.image;
        j["conversations"] = ojson::array({
            ojson{{"from", "human"}, {"value", std::string(kImageToken) + "\n" + r.question}},
            ojson{{"from", "gpt"}, {"value", r.answer}},
        });
        try {
            out += j.dump(-1, ' ', false, ojson::error_handler_t::strict);
        } catch (const nlohmann::json::exception& e) {
            throw EmitError("record '" + r.id + "' is not valid UTF-8: " + e.what());
        }
        out += '\n';
    }
    return out;
}

std::vector<VqaRecord> parse_jsonl(std::string_view bytes) {
    std::vector<VqaRecord> out;
    std::size_t number = 0;
    const std::string prefix = std::string(kImageToken) + "\n";
    for (auto line : detail::split(bytes, '\n')) {
        ++number;
        if (detail::trim(line).empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            VqaRecord r;
            r.id = j.at("id").get<std::string>();
            r.image = j.at("image").get<std::string>();
            const auto& conv = j.at("conversations");
            std::string human = conv.at(0).at("value").get<std::string>();
            if (human.starts_with(prefix)) {
                human.erase(0, prefix.size());
            }
            r.question = std::move(human);
            r.answer = conv.at(1).at("value").get<std::string>();
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed JSONL record: ") + e.what(), number);
        }
    }
    return out;
}

fs::path run_directory(const fs::path& outroot, std::string_view dataset, const Scenario& s) {
    return outroot / std::string(dataset) / scenario_id(s);
}

std::optional<RunManifest> load_completed_manifest(const fs::path& outdir) {
    const auto file = outdir / "manifest.json";
    if (!fs::exists(file) || fs::exists(outdir / kMarker)) {
        return std::nullopt;
    }
    try {
        auto m = manifest_from_json(detail::read_file(file));
        const auto digest = compute_digest(outdir, m.inputs_fingerprint);
        if (!digest || *digest != m.digest) {
            return std::nullopt;
        }
        return m;
    } catch (const Error&) {
        return std::nullopt;
    }
}

RunManifest generate_experiment(const Dataset& d, const Split& split, const Scenario& s, const fs::path& outdir,
                                const GenerationOptions& options) {
    if (options.exemplars > 1) {
        throw ConfigError("at most one in-context exemplar is supported");
    }
    const std::string fingerprint = inputs_fingerprint(d, split, s, options);
    if (auto done = load_completed_manifest(outdir); done && done->inputs_fingerprint == fingerprint) {
        return *done;
    }

    const std::string sid = scenario_id(s);
    const std::string run_name = d.name() + "/" + sid;
    std::error_code ec;
    fs::create_directories(outdir, ec);
    if (ec) {
        throw IoError("cannot create " + outdir.string() + ": " + ec.message());
    }
    detail::write_file_atomic(outdir / kMarker, std::string_view("generation in progress\n"));
    fs::remove(outdir / "manifest.json", ec);
    fs::remove_all(outdir / "images", ec);
    fs::create_directories(outdir / "images", ec);
    if (ec) {
        throw IoError("cannot create image directory: " + ec.message());
    }
    const auto log = outdir / "run.log";
    append_log(log, run_name, "start", "running");

    // Exemplar candidates: the two lexicographically smallest train ids, so a
    // target that is itself the first candidate falls back to the second.
    std::vector<PromptRecord> exemplars;
    if (options.exemplars == 1) {
        std::vector<std::string> ids = split.train;
        std::sort(ids.begin(), ids.end());
        Scenario half = s;
        half.context_length = options.reserve + (s.context_length - std::min(s.context_length, options.reserve)) / 2;
        for (std::size_t i = 0; i < ids.size() && exemplars.size() < 2; ++i) {
            try {
                exemplars.push_back(plan_sample(d.at(ids[i]), half, options).prompt);
            } catch (const BudgetError& e) {
                append_log(log, run_name, "exemplar", "skipped", {{"id", ids[i]}, {"reason", e.what()}});
            }
        }
        if (exemplars.empty()) {
            throw ConfigError("no train sample can serve as an exemplar");
        }
    }

    const std::array<const std::vector<std::string>*, 3> lists{&split.train, &split.val, &split.test};
    std::vector<Job> jobs;
    for (std::size_t k = 0; k < lists.size(); ++k) {
        for (const auto& id : *lists[k]) {
            jobs.push_back({k, &d.at(id)});
        }
    }

    RenderConfig render = options.render;
    render.plot_type = s.plot_type;
    std::vector<JobResult> results(jobs.size());
    std::exception_ptr io_failure;
    std::mutex io_mutex;

    parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
        const TimeSeries& series = *jobs[i].series;
        try {
            const PromptRecord* exemplar = nullptr;
            if (!exemplars.empty()) {
                exemplar = exemplars.front().source_id != series.id ? &exemplars.front()
                           : exemplars.size() > 1                   ? &exemplars[1]
                                                                    : nullptr;
                if (exemplar == nullptr) {
                    throw ConfigError("no exemplar other than the target itself");
                }
            }
            auto plan = plan_sample(series, s, options, exemplar);
            VqaRecord record{series.id, image_path(series.id), std::move(plan.prompt.question), series.label};
            const TimeSeries plotted =
                options.plot_full_signal ? series : TimeSeries{series.id, std::move(plan.values), series.label};
            detail::write_file_atomic(outdir / record.image, render_plot(plotted, render));
            results[i].record = std::move(record);
        } catch (const IoError&) {
            std::lock_guard lock(io_mutex);
            if (!io_failure) {
                io_failure = std::current_exception();
            }
        } catch (const Error& e) {
            results[i].skip_reason = e.what();
        }
    });
    if (io_failure) {
        append_log(log, run_name, "end", "failed");
        std::rethrow_exception(io_failure);
    }

    std::array<std::vector<VqaRecord>, 3> records;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (results[i].record) {
            records[jobs[i].split].push_back(std::move(*results[i].record));
        } else {
            ++skipped;
            append_log(log, run_name, "sample", "skipped",
                       {{"id", jobs[i].series->id}, {"reason", results[i].skip_reason}});
        }
    }
    for (std::size_t k = 0; k < 3; ++k) {
        detail::write_file_atomic(outdir / (std::string(kSplitNames[k]) + ".jsonl"), emit_jsonl(records[k]));
    }

    ojson training;
    training["epochs"] = s.epochs;
    training["lora_r"] = kLoraR;
    training["lora_alpha"] = kLoraAlpha;
    training["model"] = kModelName;
    training["context_length"] = s.context_length;
    detail::write_file_atomic(outdir / "training_config.json", training.dump(2) + "\n");

    RunManifest m;
    m.dataset = d.name();
    m.scenario_id = sid;
    m.seed = s.seed;
    m.split_sizes = {split.train.size(), split.val.size(), split.test.size()};
    m.record_counts = {records[0].size(), records[1].size(), records[2].size()};
    m.skipped = skipped;
    m.generated_at = detail::utc_timestamp();
    m.tool_version = std::string(tool_version());
    m.epochs = s.epochs;
    m.context_length = s.context_length;
    m.plot_full_signal = options.plot_full_signal;
    m.inputs_fingerprint = fingerprint;
    const auto digest = compute_digest(outdir, fingerprint);
    if (!digest) {
        throw IoError("generated artifacts missing in " + outdir.string());
    }
    m.digest = *digest;
    detail::write_file_atomic(outdir / "manifest.json", manifest_to_json(m));
    fs::remove(outdir / kMarker, ec);
    append_log(log, run_name, "end", "ok", {{"records", records[0].size() + records[1].size() + records[2].size()},
                                            {"skipped", skipped}});
    return m;
}

std::vector<RunResult> run_all(std::span<const Dataset> datasets, std::span<const Scenario> scenarios,
                               const fs::path& outroot, const GenerationOptions& options) {
    std::error_code ec;
    fs::create_directories(outroot, ec);
    const auto log = outroot / "runs.log";
    std::vector<RunResult> results;
    for (const auto& d : datasets) {
        for (const auto& s : scenarios) {
            RunResult r;
            r.dataset = d.name();
            r.scenario_id = scenario_id(s);
            const std::string run_name = r.dataset + "/" + r.scenario_id;
            append_log(log, run_name, "start", "running");
            try {
                const auto dir = run_directory(outroot, d.name(), s);
                const Split split = stratified_split(d, options.ratios, s.seed, options.strict_stratification);
                auto done = load_completed_manifest(dir);
                if (done && done->inputs_fingerprint == inputs_fingerprint(d, split, s, options)) {
                    r.status = RunStatus::Skipped;
                    r.manifest = std::move(done);
                } else {
                    r.manifest = generate_experiment(d, split, s, dir, options);
                    r.status = RunStatus::Ok;
                }
            } catch (const std::exception& e) {
                r.status = RunStatus::Failed;
                r.error = e.what();
            }
            ojson extra = ojson::object();
            if (!r.error.empty()) {
                extra["error"] = r.error;
            }
            append_log(log, run_name, "end", to_string(r.status), extra);
            results.push_back(std::move(r));
        }
    }
    return results;
}

} // namespace tsvlm
