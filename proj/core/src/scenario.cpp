#include "tsvlm/scenario.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <functional>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "detail.hpp"
#include "tsvlm/errors.hpp"

namespace tsvlm {

namespace {

constexpr std::array<std::string_view, 8> kAxisNames{"context_length", "downsampling", "plot_type", "prompt_mode",
                                                     "epochs",         "window",       "threshold", "seed"};

bool is_axis(std::string_view name) {
    return std::find(kAxisNames.begin(), kAxisNames.end(), name) != kAxisNames.end();
}

std::uint64_t parse_unsigned(std::string_view axis, std::string_view text) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw ConfigError("axis '" + std::string(axis) + "': '" + std::string(text) + "' is not a non-negative integer");
    }
    return v;
}

using Setter = std::function<void(Scenario&, const std::string&)>;

Setter setter_for(const std::string& axis) {
    if (axis == "context_length") {
        return [axis](Scenario& s, const std::string& v) {
            s.context_length = parse_unsigned(axis, v);
            if (s.context_length == 0) {
                throw ConfigError("context_length must be positive");
            }
        };
    }
    if (axis == "downsampling") {
        return [](Scenario& s, const std::string& v) { s.downsampling = parse_strategy(v); };
    }
    if (axis == "plot_type") {
        return [](Scenario& s, const std::string& v) { s.plot_type = parse_plot_type(v); };
    }
    if (axis == "prompt_mode") {
        return [](Scenario& s, const std::string& v) { s.prompt_mode = parse_prompt_mode(v); };
    }
    if (axis == "epochs") {
        return [axis](Scenario& s, const std::string& v) {
            s.epochs = parse_unsigned(axis, v);
            if (s.epochs == 0) {
                throw ConfigError("epochs must be >= 1");
            }
        };
    }
    if (axis == "window") {
        return [axis](Scenario& s, const std::string& v) {
            s.window = parse_unsigned(axis, v);
            if (s.window < 2) {
                throw ConfigError("window must be >= 2");
            }
        };
    }
    if (axis == "threshold") {
        return [](Scenario& s, const std::string& v) {
            auto t = detail::parse_real(v);
            if (!t || *t < 0.0) {
                throw ConfigError("threshold '" + v + "' must be a non-negative real");
            }
            s.threshold = *t;
        };
    }
    if (axis == "seed") {
        return [axis](Scenario& s, const std::string& v) { s.seed = parse_unsigned(axis, v); };
    }
    throw ConfigError("unknown grid axis '" + axis + "'");
}

} // namespace

ScenarioGrid default_grid() {
    return ScenarioGrid{{
        {"context_length", {"2048", "4096"}},
        {"downsampling", {"uniform", "adaptive"}},
        {"plot_type", {"line", "scatter"}},
        {"prompt_mode", {"baseline", "with_stats"}},
        {"epochs", {"2"}},
    }};
}

std::vector<Scenario> expand_grid(const ScenarioGrid& g) {
    std::set<std::string> seen;
    std::vector<Setter> setters;
    for (const auto& axis : g.axes) {
        if (!seen.insert(axis.name).second) {
            throw ConfigError("duplicate grid axis '" + axis.name + "'");
        }
        if (axis.values.empty()) {
            throw ConfigError(axis.name);
        }
        setters.push_back(setter_for(axis.name));
    }

    std::vector<Scenario> out;
    std::vector<std::size_t> digit(g.axes.size(), 0);
    while (true) {
        Scenario s;
        for (std::size_t a = 0; a < g.axes.size(); ++a) {
            setters[a](s, g.axes[a].values[digit[a]]);
        }
        out.push_back(s);
        std::size_t a = g.axes.size();
        while (a > 0) {
            --a;
            if (++digit[a] < g.axes[a].values.size()) {
                break;
            }
            digit[a] = 0;
            if (a == 0) {
                return out;
            }
        }
        if (g.axes.empty()) {
            return out;
        }
    }
}

std::string scenario_id(const Scenario& s) {
    std::string id = "ctx" + std::to_string(s.context_length) + "_" + std::string(to_string(s.downsampling)) + "_" +
                     std::string(to_string(s.plot_type)) + "_" + std::string(to_string(s.prompt_mode)) + "_ep" +
                     std::to_string(s.epochs) + "_s" + std::to_string(s.seed);
    if (s.window != kDefaultWindow || s.threshold != kDefaultThreshold) {
        id += "_w" + std::to_string(s.window) + "_t" + detail::format_real(s.threshold);
    }
    return id;
}

Scenario parse_scenario_id(std::string_view id) {
    static const std::regex kPattern(
        R"(ctx(\d+)_(uniform|adaptive)_(line|scatter)_(baseline|with_stats)_ep(\d+)_s(\d+)(?:_w(\d+)_t([0-9.eE+-]+))?)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(id.begin(), id.end(), m, kPattern)) {
        throw ConfigError("malformed scenario id '" + std::string(id) + "'");
    }
    Scenario s;
    setter_for("context_length")(s, m[1].str());
    s.downsampling = parse_strategy(m[2].str());
    s.plot_type = parse_plot_type(m[3].str());
    s.prompt_mode = parse_prompt_mode(m[4].str());
    setter_for("epochs")(s, m[5].str());
    setter_for("seed")(s, m[6].str());
    if (m[7].matched) {
        setter_for("window")(s, m[7].str());
        setter_for("threshold")(s, m[8].str());
    }
    return s;
}

namespace {

std::string toml_scalar(const std::string& key, const toml::node& node) {
    if (auto v = node.as_integer()) {
        if (v->get() < 0) {
            throw ConfigError("axis '" + key + "' has a negative value");
        }
        return std::to_string(v->get());
    }
    if (auto v = node.as_floating_point()) {
        return detail::format_real(v->get());
    }
    if (auto v = node.as_string()) {
        return v->get();
    }
    throw ConfigError("axis '" + key + "' must hold integers, reals or strings");
}

} // namespace

ScenarioGrid parse_grid_toml(std::string_view text) {
    toml::table tbl;
    try {
        tbl = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw ConfigError("invalid grid TOML: " + std::string(e.description()));
    }
    struct Entry {
        toml::source_position pos;
        GridAxis axis;
    };
    std::vector<Entry> entries;
    for (auto&& [key, node] : tbl) {
        const std::string name(key.str());
        if (!is_axis(name)) {
            throw ConfigError("unknown grid key '" + name + "'");
        }
        GridAxis axis{name, {}};
        if (auto arr = node.as_array()) {
            for (const auto& item : *arr) {
                axis.values.push_back(toml_scalar(name, item));
            }
        } else {
            axis.values.push_back(toml_scalar(name, node));
        }
        entries.push_back({node.source().begin, std::move(axis)});
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.pos.line != b.pos.line ? a.pos.line < b.pos.line : a.pos.column < b.pos.column;
    });
    ScenarioGrid g;
    for (auto& e : entries) {
        g.axes.push_back(std::move(e.axis));
    }
    return g;
}

ScenarioGrid load_grid_toml(const std::filesystem::path& path) {
    return parse_grid_toml(detail::read_file(path));
}

std::string scenarios_to_json(const std::vector<Scenario>& scenarios) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : scenarios) {
        nlohmann::ordered_json j;
        j["id"] = scenario_id(s);
        j["context_length"] = s.context_length;
        j["downsampling"] = to_string(s.downsampling);
        j["plot_type"] = to_string(s.plot_type);
        j["prompt_mode"] = to_string(s.prompt_mode);
        j["epochs"] = s.epochs;
        j["window"] = s.window;
        j["threshold"] = s.threshold;
        j["seed"] = s.seed;
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::vector<Scenario> scenarios_from_json(std::string_view bytes) {
    std::vector<Scenario> out;
    try {
        for (const auto& j : nlohmann::json::parse(bytes)) {
            Scenario s;
            s.context_length = j.at("context_length").get<std::size_t>();
            s.downsampling = parse_strategy(j.at("downsampling").get<std::string>());
            s.plot_type = parse_plot_type(j.at("plot_type").get<std::string>());
            s.prompt_mode = parse_prompt_mode(j.at("prompt_mode").get<std::string>());
            s.epochs = j.at("epochs").get<std::size_t>();
            s.window = j.value("window", kDefaultWindow);
            s.threshold = j.value("threshold", kDefaultThreshold);
            s.seed = j.value("seed", std::uint64_t{0});
            if (j.contains("id") && j["id"].get<std::string>() != scenario_id(s)) {
                throw ConfigError("scenario id '" + j["id"].get<std::string>() + "' does not match its fields");
            }
            out.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed scenarios JSON: ") + e.what());
    }
    return out;
}

} // namespace tsvlm
