#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsvlm/runner.hpp"

namespace tsvlm {

struct ModelResponse {
    std::optional<std::string> text;
    std::optional<std::map<std::string, double>> scores;
};

// Wire request: {"prompt": string, "image": base64 PNG, "choices": [string]}.
struct ClassifyRequest {
    std::string prompt;
    std::string image_base64;
    std::vector<std::string> choices;
};

class ModelClient {
public:
    virtual ~ModelClient() = default;
    // Throws TransportError for retryable failures, ProtocolError otherwise.
    virtual ModelResponse send(const ClassifyRequest& request) = 0;
};

// POSTs the request as JSON to `url` ("http://host:port[/path]", path
// defaults to /classify).
class HttpModelClient : public ModelClient {
public:
    explicit HttpModelClient(std::string url,
                             std::chrono::milliseconds timeout = std::chrono::seconds(30));
    ModelResponse send(const ClassifyRequest& request) override;

private:
    std::string base_;
    std::string path_;
    std::chrono::milliseconds timeout_;
};

// Answers with the first offered choice.
class FirstChoiceClient : public ModelClient {
public:
    ModelResponse send(const ClassifyRequest& request) override;
};

struct LabeledValues {
    std::vector<std::vector<double>> values;
    std::string label;
};

// k-NN over values parsed back out of the prompt text.
class KnnClient : public ModelClient {
public:
    KnnClient(std::vector<LabeledValues> train, std::size_t k = 1);
    // Reads train.jsonl of a generated run.
    static KnnClient from_run(const std::filesystem::path& run_dir, std::size_t k = 1);

    ModelResponse send(const ClassifyRequest& request) override;

private:
    std::vector<LabeledValues> train_;
    std::size_t k_;
};

// "mock:knn", "mock:first" or an http:// URL.
std::unique_ptr<ModelClient> make_client(std::string_view name, const std::filesystem::path& run_dir,
                                         std::size_t k = 1);

struct RetryPolicy {
    std::size_t max_retries = 3;
    std::chrono::milliseconds initial_backoff{100};
    double multiplier = 2.0;
};

// Sends prompt + base64 image + choices, retrying TransportError with
// exponential backoff. Validates the response shape.
ModelResponse classify(ModelClient& client, const VqaRecord& record, std::span<const std::string> choices,
                       const std::filesystem::path& run_dir, const RetryPolicy& retry = {});

// Argmax over offered choices when scores are present (ties -> earlier
// choice), else the first standalone choice token in the normalized text.
// nullopt means abstain.
std::optional<std::string> extract_answer(const ModelResponse& response, std::span<const std::string> choices);

struct Prediction {
    std::string id;
    std::string truth;
    std::optional<std::string> predicted;
    std::string raw_text;
};

struct ClassTally {
    std::size_t n = 0;
    std::size_t correct = 0;

    bool operator==(const ClassTally&) const = default;
};

struct EvalReport {
    std::string dataset;
    std::string scenario_id;
    std::size_t n = 0;
    std::size_t correct = 0;
    std::size_t abstained = 0;
    double accuracy = 0.0;
    std::map<std::string, ClassTally> per_class;
    std::vector<Prediction> predictions;
};

// Abstentions count as incorrect. Throws EmptyInput on an empty list.
EvalReport one_shot_accuracy(std::span<const Prediction> predictions);

// Label of the k nearest train series under Euclidean distance (distance ties
// -> lower train index, vote ties -> label of the nearer neighbour). The query
// is resampled by uniform stride to each train series' length when needed.
std::string knn_oracle(std::span<const LabeledValues> train, const std::vector<std::vector<double>>& query,
                       std::size_t k = 1);

struct EvalOptions {
    std::size_t parallel = 1;
    RetryPolicy retry;
};

// Scores every record of <run_dir>/test.jsonl; predictions ordered by id.
EvalReport evaluate_run(const std::filesystem::path& run_dir, ModelClient& client, const EvalOptions& options = {});

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(std::string_view bytes);

enum class ReportFormat { Markdown, Csv };
ReportFormat parse_report_format(std::string_view s);

// "85.08%"
std::string format_percent(double accuracy);

// Columns: Dataset, Plot Type, Prompt Type, Downsampling, Context Length, Accuracy.
std::string report(std::span<const EvalReport> reports, ReportFormat format);

std::string base64_encode(std::span<const std::uint8_t> bytes);

} // namespace tsvlm
