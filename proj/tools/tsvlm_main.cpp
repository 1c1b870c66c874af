#include <glob.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include <CLI11.hpp>

#include "tsvlm/corpus.hpp"
#include "tsvlm/errors.hpp"
#include "tsvlm/eval.hpp"
#include "tsvlm/runner.hpp"
#include "tsvlm/scenario.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw tsvlm::IoError("cannot read " + p.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary);
    out << bytes;
    if (!out) {
        throw tsvlm::IoError("cannot write " + p.string());
    }
}

struct CorpusFlags {
    std::string format = "auto";
    std::string label_map;
    bool znorm = false;
};

void add_corpus_flags(CLI::App* cmd, CorpusFlags& f) {
    cmd->add_option("--format", f.format, "Input format")
        ->check(CLI::IsMember({"auto", "ucr", "sktime", "json"}));
    cmd->add_option("--label-map", f.label_map, "JSON object mapping child labels to parent labels");
    cmd->add_flag("--znorm", f.znorm, "Z-normalize every series dimension");
}

tsvlm::Dataset load(const std::string& path, const CorpusFlags& f) {
    auto format = tsvlm::CorpusFormat::Auto;
    if (f.format == "ucr") {
        format = tsvlm::CorpusFormat::Ucr;
    } else if (f.format == "sktime") {
        format = tsvlm::CorpusFormat::Sktime;
    } else if (f.format == "json") {
        format = tsvlm::CorpusFormat::Canonical;
    }
    auto d = tsvlm::load_corpus(path, format);
    if (!f.label_map.empty()) {
        d = tsvlm::remap_labels(d, tsvlm::parse_label_map_json(slurp(f.label_map)));
    }
    if (f.znorm) {
        d = tsvlm::znormalize(d);
    }
    return d;
}

struct GenerationFlags {
    std::size_t exemplars = 0;
    bool plot_full_signal = false;
    bool lenient = false;
    std::size_t reserve = tsvlm::kDefaultReserveTokens;
    int width = 336;
    int height = 336;
};

void add_generation_flags(CLI::App* cmd, GenerationFlags& f) {
    cmd->add_option("--exemplars", f.exemplars, "In-context exemplars per prompt (0 or 1)")->check(CLI::Range(0, 1));
    cmd->add_flag("--plot-full-signal", f.plot_full_signal, "Plot the raw series instead of the downsampled one");
    cmd->add_flag("--lenient", f.lenient, "Allow classes too small to reach every split");
    cmd->add_option("--reserve", f.reserve, "Tokens reserved for the image and answer");
    cmd->add_option("--width", f.width, "Image width in pixels");
    cmd->add_option("--height", f.height, "Image height in pixels");
}

tsvlm::GenerationOptions options_from(const GenerationFlags& f, std::size_t workers) {
    tsvlm::GenerationOptions o;
    o.exemplars = f.exemplars;
    o.plot_full_signal = f.plot_full_signal;
    o.strict_stratification = !f.lenient;
    o.reserve = f.reserve;
    o.render.width = f.width;
    o.render.height = f.height;
    o.workers = std::max<std::size_t>(workers, 1);
    return o;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    std::vector<std::string> out;
    if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) {
            out.emplace_back(g.gl_pathv[i]);
        }
    }
    globfree(&g);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-series to vision-language dataset pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tsvlm::tool_version()));

    CorpusFlags corpus_flags;
    GenerationFlags gen_flags;

    auto* convert = app.add_subcommand("convert", "Convert a UCR or .ts corpus to canonical JSON");
    std::string convert_in;
    std::string convert_out;
    convert->add_option("--corpus", convert_in, "Input corpus")->required();
    convert->add_option("--out", convert_out, "Output JSON file")->required();
    add_corpus_flags(convert, corpus_flags);

    auto* scenarios = app.add_subcommand("scenarios", "Expand a scenario grid");
    std::string grid_file;
    std::string scenarios_out;
    scenarios->add_option("--config", grid_file, "Grid TOML (default grid when omitted)");
    scenarios->add_option("--out", scenarios_out, "Output scenarios.json (stdout when omitted)");

    auto* generate = app.add_subcommand("generate", "Generate one experiment");
    std::string gen_corpus;
    std::string gen_scenario;
    std::string gen_outdir;
    std::string gen_downsample;
    std::optional<std::size_t> gen_window;
    std::optional<double> gen_threshold;
    std::size_t gen_workers = 1;
    generate->add_option("--corpus", gen_corpus, "Input corpus")->required();
    generate->add_option("--scenario", gen_scenario, "Scenario id")->required();
    generate->add_option("--outdir", gen_outdir, "Output directory")->required();
    generate->add_option("--downsample", gen_downsample, "Override the downsampling strategy")
        ->check(CLI::IsMember({"uniform", "adaptive"}));
    generate->add_option("--window", gen_window, "Override the adaptive window size");
    generate->add_option("--threshold", gen_threshold, "Override the adaptive variability floor");
    generate->add_option("--workers", gen_workers, "Worker threads");
    add_corpus_flags(generate, corpus_flags);
    add_generation_flags(generate, gen_flags);

    auto* run = app.add_subcommand("run", "Generate every dataset x scenario experiment");
    std::vector<std::string> run_corpora;
    std::string run_scenarios;
    std::string run_outroot;
    std::size_t run_workers = 1;
    run->add_option("--corpus", run_corpora, "Input corpus (repeatable)")->required();
    run->add_option("--scenarios", run_scenarios, "scenarios.json or grid TOML")->required();
    run->add_option("--outroot", run_outroot, "Output root")->required();
    run->add_option("--workers", run_workers, "Worker threads per run");
    add_corpus_flags(run, corpus_flags);
    add_generation_flags(run, gen_flags);

    auto* eval = app.add_subcommand("eval", "Score a generated run");
    std::string eval_run;
    std::string eval_client;
    std::size_t eval_k = 1;
    std::string eval_out;
    std::size_t eval_parallel = 1;
    eval->add_option("--run", eval_run, "Run directory")->required();
    eval->add_option("--client", eval_client, "http://HOST:PORT[/path], mock:knn or mock:first")->required();
    eval->add_option("--k", eval_k, "Neighbours for mock:knn");
    eval->add_option("--out", eval_out, "results.json (stdout when omitted)");
    eval->add_option("--parallel", eval_parallel, "Concurrent requests");

    auto* rep = app.add_subcommand("report", "Tabulate results files");
    std::vector<std::string> rep_globs;
    std::string rep_format = "md";
    rep->add_option("--results", rep_globs, "results.json glob (repeatable)")->required();
    rep->add_option("--format", rep_format, "md or csv")->check(CLI::IsMember({"md", "csv"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*convert) {
            spit(convert_out, tsvlm::to_canonical_json(load(convert_in, corpus_flags)));
        } else if (*scenarios) {
            const auto grid = grid_file.empty() ? tsvlm::default_grid() : tsvlm::load_grid_toml(grid_file);
            const auto json = tsvlm::scenarios_to_json(tsvlm::expand_grid(grid));
            if (scenarios_out.empty()) {
                std::cout << json;
            } else {
                spit(scenarios_out, json);
            }
        } else if (*generate) {
            const auto d = load(gen_corpus, corpus_flags);
            auto s = tsvlm::parse_scenario_id(gen_scenario);
            if (!gen_downsample.empty()) {
                s.downsampling = tsvlm::parse_strategy(gen_downsample);
            }
            if (gen_window) {
                s.window = *gen_window;
            }
            if (gen_threshold) {
                s.threshold = *gen_threshold;
            }
            const auto o = options_from(gen_flags, gen_workers);
            const auto split = tsvlm::stratified_split(d, o.ratios, s.seed, o.strict_stratification);
            const auto m = tsvlm::generate_experiment(d, split, s, gen_outdir, o);
            std::cout << tsvlm::manifest_to_json(m);
        } else if (*run) {
            std::vector<tsvlm::Dataset> datasets;
            for (const auto& c : run_corpora) {
                datasets.push_back(load(c, corpus_flags));
            }
            const std::vector<tsvlm::Scenario> list =
                fs::path(run_scenarios).extension() == ".toml"
                    ? tsvlm::expand_grid(tsvlm::load_grid_toml(run_scenarios))
                    : tsvlm::scenarios_from_json(slurp(run_scenarios));
            const auto results = tsvlm::run_all(datasets, list, run_outroot, options_from(gen_flags, run_workers));
            int failed = 0;
            for (const auto& r : results) {
                std::cout << r.dataset << '/' << r.scenario_id << ' ' << tsvlm::to_string(r.status);
                if (!r.error.empty()) {
                    std::cout << ": " << r.error;
                    ++failed;
                }
                std::cout << '\n';
            }
            return failed == 0 ? 0 : 1;
        } else if (*eval) {
            auto client = tsvlm::make_client(eval_client, eval_run, eval_k);
            tsvlm::EvalOptions o;
            o.parallel = std::max<std::size_t>(eval_parallel, 1);
            const auto report = tsvlm::evaluate_run(eval_run, *client, o);
            const auto json = tsvlm::report_to_json(report);
            if (eval_out.empty()) {
                std::cout << json;
            } else {
                spit(eval_out, json);
                std::cout << report.dataset << '/' << report.scenario_id << ' ' << tsvlm::format_percent(report.accuracy)
                          << " (" << report.correct << '/' << report.n << ", " << report.abstained << " abstained)\n";
            }
        } else if (*rep) {
            std::vector<std::string> files;
            for (const auto& g : rep_globs) {
                auto matched = expand_glob(g);
                files.insert(files.end(), matched.begin(), matched.end());
            }
            std::sort(files.begin(), files.end());
            files.erase(std::unique(files.begin(), files.end()), files.end());
            std::vector<tsvlm::EvalReport> reports;
            for (const auto& f : files) {
                reports.push_back(tsvlm::report_from_json(slurp(f)));
            }
            std::cout << tsvlm::report(reports, tsvlm::parse_report_format(rep_format));
        }
    } catch (const tsvlm::ParseError& e) {
        std::cerr << "error: " << e.what();
        if (e.line() != 0) {
            std::cerr << " (line " << e.line();
            if (e.column() != 0) {
                std::cerr << ", column " << e.column();
            }
            std::cerr << ')';
        }
        std::cerr << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
