#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tsvlm {

// One labeled sample: a dims x timesteps value matrix.
struct TimeSeries {
    std::string id;
    std::vector<std::vector<double>> values;
    std::string label;

    std::size_t dims() const noexcept { return values.size(); }
    std::size_t timesteps() const noexcept { return values.empty() ? 0 : values.front().size(); }

    bool operator==(const TimeSeries&) const = default;
};

// Immutable labeled collection. The constructor validates every invariant:
// dims >= 1, timesteps >= 2, rectangular rows, finite values, unique ids,
// every series label in `labels`.
class Dataset {
public:
    // Labels are collected in first-appearance order.
    Dataset(std::string name, std::vector<TimeSeries> series);
    // Explicit label order; must cover every series label.
    Dataset(std::string name, std::vector<TimeSeries> series, std::vector<std::string> labels);

    const std::string& name() const noexcept { return name_; }
    const std::vector<TimeSeries>& series() const noexcept { return series_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::size_t dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return series_.size(); }

    // Throws std::out_of_range for unknown ids.
    const TimeSeries& at(std::string_view id) const;

    bool operator==(const Dataset&) const = default;

private:
    void validate();

    std::string name_;
    std::vector<TimeSeries> series_;
    std::vector<std::string> labels_;
    std::size_t dims_ = 0;
};

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    std::uint64_t seed = 0;

    bool operator==(const Split&) const = default;
};

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct LabelMap {
    std::map<std::string, std::string> child_to_parent;
};

enum class CorpusFormat { Auto, Ucr, Sktime, Canonical };

// UCR archive rows: label followed by values, TAB or comma separated (sniffed
// from the first data line).
Dataset parse_ucr_tsv(std::string_view bytes, std::string name = "dataset");

// sktime `.ts` subset: @problemName, @classLabel and @data are honored, other
// @-lines are ignored. Rows are colon-separated dimensions, final field label.
Dataset parse_sktime_ts(std::string_view bytes, std::string fallback_name = "dataset");

// Canonical corpus JSON: {name, dims, labels[], series[{id, label, values[][]}]}.
std::string to_canonical_json(const Dataset& d);
Dataset parse_canonical_json(std::string_view bytes);

// Reads a corpus file. Auto picks by extension: .ts -> sktime, .json ->
// canonical, anything else -> UCR. The dataset name defaults to the file stem.
Dataset load_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::Auto);

// Per class (in label order) members are shuffled by a seeded PRNG and cut by
// largest-remainder rounding of the ratios. Output lists follow dataset order.
Split stratified_split(const Dataset& d, const SplitRatios& ratios, std::uint64_t seed, bool strict = true);

Dataset remap_labels(const Dataset& d, const LabelMap& m);
LabelMap parse_label_map_json(std::string_view bytes);

// Per-series, per-dimension z-normalization; constant rows become all zeros.
Dataset znormalize(const Dataset& d);

// Replaces characters outside [A-Za-z0-9._-] so the name can prefix record ids.
std::string sanitize_name(std::string_view name);

} // namespace tsvlm
