#include "tsvlm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "detail.hpp"
#include "tsvlm/errors.hpp"

namespace tsvlm {

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : Error(line == 0     ? what
            : column == 0 ? "line " + std::to_string(line) + ": " + what
                          : "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

StratificationError::StratificationError(std::string label)
    : Error("class '" + label + "' has fewer than 3 members"), label_(std::move(label)) {}

LabelMapError::LabelMapError(std::string label)
    : Error("label '" + label + "' has no parent in the label map"), label_(std::move(label)) {}

namespace {

std::vector<std::string> first_appearance_labels(const std::vector<TimeSeries>& series) {
    std::vector<std::string> labels;
    std::unordered_set<std::string> seen;
    for (const auto& s : series) {
        if (seen.insert(s.label).second) {
            labels.push_back(s.label);
        }
    }
    return labels;
}

std::string make_id(const std::string& name, std::size_t index, std::size_t total) {
    std::size_t digits = 4;
    for (std::size_t t = total; t >= 10000; t /= 10) {
        ++digits;
    }
    std::string num = std::to_string(index);
    if (num.size() < digits) {
        num.insert(0, digits - num.size(), '0');
    }
    return name + "_" + num;
}

std::vector<TimeSeries> assign_ids(const std::string& name, std::vector<TimeSeries> series) {
    for (std::size_t i = 0; i < series.size(); ++i) {
        series[i].id = make_id(name, i, series.size());
    }
    return series;
}

struct Line {
    std::size_t number;
    std::string_view text;
};

std::vector<Line> content_lines(std::string_view bytes) {
    std::vector<Line> out;
    std::size_t number = 0;
    for (auto raw : detail::split(bytes, '\n')) {
        ++number;
        auto text = detail::trim(raw);
        if (!text.empty()) {
            out.push_back({number, text});
        }
    }
    return out;
}

} // namespace

Dataset::Dataset(std::string name, std::vector<TimeSeries> series)
    : name_(std::move(name)), series_(std::move(series)) {
    labels_ = first_appearance_labels(series_);
    validate();
}

Dataset::Dataset(std::string name, std::vector<TimeSeries> series, std::vector<std::string> labels)
    : name_(std::move(name)), series_(std::move(series)), labels_(std::move(labels)) {
    validate();
}

void Dataset::validate() {
    if (series_.empty()) {
        throw EmptyCorpus();
    }
    std::unordered_set<std::string> label_set;
    for (const auto& l : labels_) {
        if (!label_set.insert(l).second) {
            throw ConfigError("duplicate label '" + l + "'");
        }
    }
    dims_ = series_.front().dims();
    std::unordered_set<std::string> ids;
    for (const auto& s : series_) {
        if (s.dims() < 1) {
            throw ConfigError("series '" + s.id + "' has no dimensions");
        }
        if (s.dims() != dims_) {
            throw ConfigError("series '" + s.id + "' has " + std::to_string(s.dims()) + " dimensions, expected " +
                              std::to_string(dims_));
        }
        const auto t = s.timesteps();
        if (t < 2) {
            throw ConfigError("series '" + s.id + "' has fewer than 2 timesteps");
        }
        for (const auto& row : s.values) {
            if (row.size() != t) {
                throw ConfigError("series '" + s.id + "' has ragged dimensions");
            }
            for (double v : row) {
                if (!std::isfinite(v)) {
                    throw ConfigError("series '" + s.id + "' has a non-finite value");
                }
            }
        }
        if (!ids.insert(s.id).second) {
            throw ConfigError("duplicate series id '" + s.id + "'");
        }
        if (!label_set.contains(s.label)) {
            throw ConfigError("series '" + s.id + "' has undeclared label '" + s.label + "'");
        }
    }
}

const TimeSeries& Dataset::at(std::string_view id) const {
    auto it = std::find_if(series_.begin(), series_.end(), [&](const TimeSeries& s) { return s.id == id; });
    if (it == series_.end()) {
        throw std::out_of_range("unknown series id '" + std::string(id) + "'");
    }
    return *it;
}

std::string sanitize_name(std::string_view name) {
    std::string out;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    if (out.empty() || out.front() == '.') {
        out.insert(0, "d");
    }
    return out;
}

Dataset parse_ucr_tsv(std::string_view bytes, std::string name) {
    const auto lines = content_lines(bytes);
    if (lines.empty()) {
        throw EmptyCorpus();
    }
    const char sep = lines.front().text.find('\t') != std::string_view::npos ? '\t' : ',';
    std::vector<TimeSeries> series;
    series.reserve(lines.size());
    std::size_t width = 0;
    for (const auto& line : lines) {
        const auto fields = detail::split(line.text, sep);
        if (width == 0) {
            width = fields.size();
        } else if (fields.size() != width) {
            throw ParseError("ragged row: " + std::to_string(fields.size() - 1) + " values, expected " +
                                 std::to_string(width - 1),
                             line.number);
        }
        TimeSeries s;
        s.label = std::string(detail::trim(fields[0]));
        if (s.label.empty()) {
            throw ParseError("empty label", line.number, 1);
        }
        std::vector<double> row;
        row.reserve(fields.size() - 1);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            auto v = detail::parse_real(fields[j]);
            if (!v) {
                throw ParseError("non-numeric value '" + std::string(detail::trim(fields[j])) + "'", line.number,
                                 j + 1);
            }
            row.push_back(*v);
        }
        s.values.push_back(std::move(row));
        series.push_back(std::move(s));
    }
    if (width < 3) {
        throw ParseError("rows need at least 2 values", lines.front().number);
    }
    name = sanitize_name(name);
    return Dataset(name, assign_ids(name, std::move(series)));
}

Dataset parse_sktime_ts(std::string_view bytes, std::string fallback_name) {
    std::string name = std::move(fallback_name);
    std::vector<std::string> declared;
    bool in_data = false;
    std::size_t dims = 0;
    std::size_t length = 0;
    std::vector<TimeSeries> series;
    std::vector<std::size_t> row_lines;

    for (const auto& line : content_lines(bytes)) {
        if (line.text.front() == '#') {
            continue;
        }
        if (!in_data) {
            if (line.text.front() != '@') {
                throw ParseError("data row before @data", line.number);
            }
            const auto space = line.text.find_first_of(" \t");
            std::string key(line.text.substr(0, space));
            std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
            const auto rest = space == std::string_view::npos ? std::string_view{} : detail::trim(line.text.substr(space));
            if (key == "@problemname") {
                if (!rest.empty()) {
                    name = std::string(rest);
                }
            } else if (key == "@classlabel") {
                std::vector<std::string> tokens;
                std::size_t pos = 0;
                while (pos < rest.size()) {
                    const auto start = rest.find_first_not_of(" \t", pos);
                    if (start == std::string_view::npos) {
                        break;
                    }
                    const auto end = rest.find_first_of(" \t", start);
                    tokens.emplace_back(rest.substr(start, end == std::string_view::npos ? end : end - start));
                    pos = end == std::string_view::npos ? rest.size() : end;
                }
                if (!tokens.empty() && tokens.front() == "true") {
                    declared.assign(tokens.begin() + 1, tokens.end());
                }
            } else if (key == "@data") {
                in_data = true;
            }
            continue;
        }

        const auto blocks = detail::split(line.text, ':');
        if (blocks.size() < 2) {
            throw ParseError("row has no label field", line.number);
        }
        const std::size_t row_dims = blocks.size() - 1;
        if (dims == 0) {
            dims = row_dims;
        } else if (row_dims != dims) {
            throw ParseError("inconsistent dimensions: " + std::to_string(row_dims) + ", expected " +
                                 std::to_string(dims),
                             line.number);
        }
        TimeSeries s;
        s.label = std::string(detail::trim(blocks.back()));
        if (s.label.empty()) {
            throw ParseError("empty label", line.number);
        }
        std::size_t column = 0;
        for (std::size_t d = 0; d < row_dims; ++d) {
            std::vector<double> row;
            for (auto token : detail::split(blocks[d], ',')) {
                ++column;
                auto v = detail::parse_real(token);
                if (!v) {
                    throw ParseError("non-numeric value '" + std::string(detail::trim(token)) + "'", line.number,
                                     column);
                }
                row.push_back(*v);
            }
            if (length == 0) {
                length = row.size();
            } else if (row.size() != length) {
                throw ParseError("ragged series: " + std::to_string(row.size()) + " values, expected " +
                                     std::to_string(length),
                                 line.number);
            }
            s.values.push_back(std::move(row));
        }
        if (!declared.empty() && std::find(declared.begin(), declared.end(), s.label) == declared.end()) {
            throw ParseError("label '" + s.label + "' not declared in @classLabel", line.number);
        }
        series.push_back(std::move(s));
        row_lines.push_back(line.number);
    }
    if (!in_data) {
        throw ParseError("missing @data section");
    }
    if (series.empty()) {
        throw EmptyCorpus();
    }
    if (length < 2) {
        throw ParseError("series need at least 2 timesteps", row_lines.front());
    }
    name = sanitize_name(name);
    series = assign_ids(name, std::move(series));
    if (declared.empty()) {
        return Dataset(name, std::move(series));
    }
    return Dataset(name, std::move(series), std::move(declared));
}

std::string to_canonical_json(const Dataset& d) {
    nlohmann::ordered_json j;
    j["name"] = d.name();
    j["dims"] = d.dims();
    j["labels"] = d.labels();
    auto& arr = j["series"] = nlohmann::ordered_json::array();
    for (const auto& s : d.series()) {
        nlohmann::ordered_json item;
        item["id"] = s.id;
        item["label"] = s.label;
        item["values"] = s.values;
        arr.push_back(std::move(item));
    }
    return j.dump(-1, ' ', false) + "\n";
}

Dataset parse_canonical_json(std::string_view bytes) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid corpus JSON: ") + e.what());
    }
    try {
        std::vector<TimeSeries> series;
        for (const auto& item : j.at("series")) {
            TimeSeries s;
            s.id = item.at("id").get<std::string>();
            s.label = item.at("label").get<std::string>();
            s.values = item.at("values").get<std::vector<std::vector<double>>>();
            series.push_back(std::move(s));
        }
        if (series.empty()) {
            throw EmptyCorpus();
        }
        Dataset d(j.at("name").get<std::string>(), std::move(series),
                  j.at("labels").get<std::vector<std::string>>());
        if (d.dims() != j.at("dims").get<std::size_t>()) {
            throw ParseError("declared dims does not match series");
        }
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed corpus JSON: ") + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(e.what());
    }
}

Dataset load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    const std::string bytes = detail::read_file(path);
    if (format == CorpusFormat::Auto) {
        const auto ext = path.extension().string();
        format = ext == ".ts" ? CorpusFormat::Sktime : ext == ".json" ? CorpusFormat::Canonical : CorpusFormat::Ucr;
    }
    const std::string stem = path.stem().string();
    switch (format) {
    case CorpusFormat::Sktime:
        return parse_sktime_ts(bytes, stem);
    case CorpusFormat::Canonical:
        return parse_canonical_json(bytes);
    default:
        return parse_ucr_tsv(bytes, stem);
    }
}

Split stratified_split(const Dataset& d, const SplitRatios& ratios, std::uint64_t seed, bool strict) {
    const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
    for (double x : r) {
        if (!(x > 0.0)) {
            throw ConfigError("split ratios must be positive");
        }
    }
    if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
        throw ConfigError("split ratios must sum to 1");
    }

    std::unordered_map<std::string, std::size_t> class_of;
    for (std::size_t c = 0; c < d.labels().size(); ++c) {
        class_of.emplace(d.labels()[c], c);
    }
    std::unordered_map<std::string, std::size_t> position;
    std::vector<std::vector<std::string>> members(d.labels().size());
    for (std::size_t i = 0; i < d.series().size(); ++i) {
        const auto& s = d.series()[i];
        members[class_of.at(s.label)].push_back(s.id);
        position.emplace(s.id, i);
    }

    std::mt19937_64 engine(seed);
    for (std::size_t c = 0; c < members.size(); ++c) {
        if (strict && !members[c].empty() && members[c].size() < 3) {
            throw StratificationError(d.labels()[c]);
        }
        detail::shuffle(members[c], engine);
    }

    constexpr double kEps = 1e-9;
    const std::size_t classes = members.size();
    std::vector<std::array<long long, 3>> count(classes);
    std::vector<std::array<double, 3>> frac(classes);
    std::vector<long long> left(classes);
    std::array<long long, 3> need{};

    // Global targets by largest remainder, ties -> earlier split.
    const double n = static_cast<double>(d.size());
    std::array<std::pair<double, std::size_t>, 3> order{};
    long long assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = n * r[k];
        need[k] = static_cast<long long>(std::floor(exact + kEps));
        order[k] = {std::max(0.0, exact - static_cast<double>(need[k])), k};
        assigned += need[k];
    }
    std::stable_sort(order.begin(), order.end(), [](auto a, auto b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < static_cast<long long>(d.size()); ++i, ++assigned) {
        ++need[order[i % 3].second];
    }

    for (std::size_t c = 0; c < classes; ++c) {
        const double nc = static_cast<double>(members[c].size());
        left[c] = static_cast<long long>(members[c].size());
        for (std::size_t k = 0; k < 3; ++k) {
            const double exact = nc * r[k];
            count[c][k] = static_cast<long long>(std::floor(exact + kEps));
            const double f = exact - static_cast<double>(count[c][k]);
            frac[c][k] = f < kEps ? 0.0 : f;
            left[c] -= count[c][k];
            need[k] -= count[c][k];
        }
    }

    // Hand leftover class members to the cells with the largest fractional
    // parts (ties -> class order, then split order) while the global targets
    // still need them. Each cell gains at most one, so per-class counts stay
    // within one of class_size * ratio.
    struct Cell {
        double frac;
        std::size_t c;
        std::size_t k;
    };
    std::vector<Cell> cells;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t k = 0; k < 3; ++k) {
            if (frac[c][k] > 0.0) {
                cells.push_back({frac[c][k], c, k});
            }
        }
    }
    std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.frac > b.frac; });
    std::vector<std::array<bool, 3>> bumped(classes, {false, false, false});
    for (const auto& cell : cells) {
        if (left[cell.c] > 0 && need[cell.k] > 0) {
            ++count[cell.c][cell.k];
            --left[cell.c];
            --need[cell.k];
            bumped[cell.c][cell.k] = true;
        }
    }
    for (const auto& cell : cells) {
        if (left[cell.c] > 0 && !bumped[cell.c][cell.k]) {
            ++count[cell.c][cell.k];
            --left[cell.c];
            bumped[cell.c][cell.k] = true;
        }
    }

    Split out;
    out.seed = seed;
    std::array<std::vector<std::string>*, 3> lists{&out.train, &out.val, &out.test};
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t cursor = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            for (long long i = 0; i < count[c][k]; ++i) {
                lists[k]->push_back(members[c][cursor++]);
            }
        }
    }
    for (auto* list : lists) {
        std::sort(list->begin(), list->end(),
                  [&](const std::string& a, const std::string& b) { return position.at(a) < position.at(b); });
    }
    return out;
}

Dataset remap_labels(const Dataset& d, const LabelMap& m) {
    std::vector<std::string> parents;
    std::unordered_set<std::string> seen;
    for (const auto& label : d.labels()) {
        auto it = m.child_to_parent.find(label);
        if (it == m.child_to_parent.end()) {
            throw LabelMapError(label);
        }
        if (seen.insert(it->second).second) {
            parents.push_back(it->second);
        }
    }
    std::vector<TimeSeries> series = d.series();
    for (auto& s : series) {
        s.label = m.child_to_parent.at(s.label);
    }
    return Dataset(d.name(), std::move(series), std::move(parents));
}

LabelMap parse_label_map_json(std::string_view bytes) {
    try {
        LabelMap m;
        m.child_to_parent = nlohmann::json::parse(bytes).get<std::map<std::string, std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("label map must be a JSON object of strings: ") + e.what());
    }
}

Dataset znormalize(const Dataset& d) {
    std::vector<TimeSeries> series = d.series();
    for (auto& s : series) {
        for (auto& row : s.values) {
            const double n = static_cast<double>(row.size());
            const double mean = std::accumulate(row.begin(), row.end(), 0.0) / n;
            double ss = 0.0;
            for (double v : row) {
                ss += (v - mean) * (v - mean);
            }
            const double sd = std::sqrt(ss / n);
            for (double& v : row) {
                v = sd > 0.0 ? (v - mean) / sd : 0.0;
            }
        }
    }
    return Dataset(d.name(), std::move(series), d.labels());
}

} // namespace tsvlm
