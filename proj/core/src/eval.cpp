#include "tsvlm/eval.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "detail.hpp"
#include "tsvlm/errors.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace tsvlm {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    std::size_t written = 0;
    // EVP_EncodeBlock takes an int length; feed it in chunks divisible by 3.
    constexpr std::size_t kChunk = 3 * (1u << 20);
    for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
        const std::size_t len = std::min(kChunk, bytes.size() - off);
        written += static_cast<std::size_t>(EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data() + written),
                                                            bytes.data() + off, static_cast<int>(len)));
    }
    out.resize(written);
    return out;
}

namespace {

ModelResponse parse_response(std::string_view body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ProtocolError("response is not a JSON object");
    }
    ModelResponse r;
    if (j.contains("text")) {
        if (!j["text"].is_string()) {
            throw ProtocolError("'text' must be a string");
        }
        r.text = j["text"].get<std::string>();
    }
    if (j.contains("scores")) {
        if (!j["scores"].is_object()) {
            throw ProtocolError("'scores' must be an object");
        }
        std::map<std::string, double> scores;
        for (auto it = j["scores"].begin(); it != j["scores"].end(); ++it) {
            if (!it.value().is_number()) {
                throw ProtocolError("score for '" + it.key() + "' is not a number");
            }
            scores[it.key()] = it.value().get<double>();
        }
        r.scores = std::move(scores);
    }
    return r;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) != 0) {
            cur += static_cast<char>(std::tolower(u));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        tokens.push_back(std::move(cur));
    }
    return tokens;
}

double squared_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    double sum = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        for (std::size_t i = 0; i < a[d].size(); ++i) {
            const double diff = a[d][i] - b[d][i];
            sum += diff * diff;
        }
    }
    return sum;
}

std::vector<std::vector<double>> resample(const std::vector<std::vector<double>>& q, std::size_t len) {
    std::vector<std::vector<double>> out;
    out.reserve(q.size());
    for (const auto& row : q) {
        if (row.size() == len) {
            out.push_back(row);
            continue;
        }
        std::vector<double> r(len);
        for (std::size_t i = 0; i < len; ++i) {
            r[i] = row[i * row.size() / len];
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::string> read_labels(const fs::path& run_dir) {
    std::vector<std::string> labels;
    for (const char* name : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
        const auto file = run_dir / name;
        if (!fs::exists(file)) {
            continue;
        }
        for (const auto& r : parse_jsonl(detail::read_file(file))) {
            if (std::find(labels.begin(), labels.end(), r.answer) == labels.end()) {
                labels.push_back(r.answer);
            }
        }
    }
    return labels;
}

} // namespace

HttpModelClient::HttpModelClient(std::string url, std::chrono::milliseconds timeout) : timeout_(timeout) {
    static const std::string kScheme = "http://";
    if (!url.starts_with(kScheme)) {
        throw ConfigError("model endpoint '" + url + "' must start with http://");
    }
    const auto slash = url.find('/', kScheme.size());
    base_ = slash == std::string::npos ? url : url.substr(0, slash);
    path_ = slash == std::string::npos || slash + 1 == url.size() ? "/classify" : url.substr(slash);
    if (base_.size() == kScheme.size()) {
        throw ConfigError("model endpoint '" + url + "' has no host");
    }
}

ModelResponse HttpModelClient::send(const ClassifyRequest& request) {
    httplib::Client cli(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());

    ojson body;
    body["prompt"] = request.prompt;
    body["image"] = request.image_base64;
    body["choices"] = request.choices;
    auto res = cli.Post(path_, body.dump(), "application/json");
    if (!res) {
        throw TransportError("request to " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("server returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw ProtocolError("server returned HTTP " + std::to_string(res->status));
    }
    return parse_response(res->body);
}

ModelResponse FirstChoiceClient::send(const ClassifyRequest& request) {
    if (request.choices.empty()) {
        throw ProtocolError("no choices offered");
    }
    return {request.choices.front(), std::nullopt};
}

KnnClient::KnnClient(std::vector<LabeledValues> train, std::size_t k) : train_(std::move(train)), k_(k) {
    if (train_.empty()) {
        throw EmptyInput("k-NN client needs training data");
    }
    if (k_ == 0 || k_ > train_.size()) {
        throw ConfigError("k must be in [1, " + std::to_string(train_.size()) + "]");
    }
}

KnnClient KnnClient::from_run(const fs::path& run_dir, std::size_t k) {
    std::vector<LabeledValues> train;
    for (const auto& r : parse_jsonl(detail::read_file(run_dir / "train.jsonl"))) {
        train.push_back({parse_prompt_values(r.question), r.answer});
    }
    return KnnClient(std::move(train), k);
}

ModelResponse KnnClient::send(const ClassifyRequest& request) {
    std::vector<std::vector<double>> query;
    try {
        query = parse_prompt_values(request.prompt);
    } catch (const ParseError& e) {
        throw ProtocolError(std::string("k-NN client cannot read the prompt: ") + e.what());
    }
    return {knn_oracle(train_, query, k_), std::nullopt};
}

std::unique_ptr<ModelClient> make_client(std::string_view name, const fs::path& run_dir, std::size_t k) {
    if (name == "mock:knn") {
        return std::make_unique<KnnClient>(KnnClient::from_run(run_dir, k));
    }
    if (name == "mock:first") {
        return std::make_unique<FirstChoiceClient>();
    }
    if (name.starts_with("http://")) {
        return std::make_unique<HttpModelClient>(std::string(name));
    }
    throw ConfigError("unknown client '" + std::string(name) + "'");
}

ModelResponse classify(ModelClient& client, const VqaRecord& record, std::span<const std::string> choices,
                       const fs::path& run_dir, const RetryPolicy& retry) {
    const auto image = run_dir / record.image;
    if (!fs::exists(image)) {
        throw IoError("image " + image.string() + " does not exist");
    }
    const std::string png = detail::read_file(image);
    ClassifyRequest request{record.question,
                            base64_encode({reinterpret_cast<const std::uint8_t*>(png.data()), png.size()}),
                            {choices.begin(), choices.end()}};

    auto backoff = retry.initial_backoff;
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            ModelResponse r = client.send(request);
            if (!r.text && !r.scores) {
                throw ProtocolError("response has neither text nor scores");
            }
            if (r.scores) {
                for (const auto& [label, score] : *r.scores) {
                    if (std::find(choices.begin(), choices.end(), label) == choices.end()) {
                        throw ProtocolError("score for unoffered label '" + label + "'");
                    }
                    if (!std::isfinite(score)) {
                        throw ProtocolError("score for '" + label + "' is not finite");
                    }
                }
            }
            return r;
        } catch (const TransportError& e) {
            if (attempt >= retry.max_retries) {
                throw TransportError("giving up after " + std::to_string(attempt + 1) + " attempts: " + e.what());
            }
        }
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<std::chrono::milliseconds::rep>(static_cast<double>(backoff.count()) * retry.multiplier));
    }
}

std::optional<std::string> extract_answer(const ModelResponse& response, std::span<const std::string> choices) {
    if (response.scores && !response.scores->empty()) {
        std::optional<std::string> best;
        double best_score = -std::numeric_limits<double>::infinity();
        for (const auto& c : choices) {
            auto it = response.scores->find(c);
            if (it != response.scores->end() && (!best || it->second > best_score)) {
                best = c;
                best_score = it->second;
            }
        }
        return best;
    }
    if (!response.text) {
        return std::nullopt;
    }
    const auto tokens = tokenize(*response.text);
    std::vector<std::vector<std::string>> choice_tokens;
    choice_tokens.reserve(choices.size());
    for (const auto& c : choices) {
        choice_tokens.push_back(tokenize(c));
    }
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        std::optional<std::size_t> hit;
        for (std::size_t c = 0; c < choices.size(); ++c) {
            const auto& ct = choice_tokens[c];
            if (ct.empty() || pos + ct.size() > tokens.size()) {
                continue;
            }
            if (!std::equal(ct.begin(), ct.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos))) {
                continue;
            }
            if (!hit || ct.size() > choice_tokens[*hit].size()) {
                hit = c;
            }
        }
        if (hit) {
            return choices[*hit];
        }
    }
    return std::nullopt;
}

EvalReport one_shot_accuracy(std::span<const Prediction> predictions) {
    if (predictions.empty()) {
        throw EmptyInput("no predictions to score");
    }
    EvalReport r;
    r.n = predictions.size();
    for (const auto& p : predictions) {
        auto& tally = r.per_class[p.truth];
        ++tally.n;
        if (!p.predicted) {
            ++r.abstained;
        } else if (*p.predicted == p.truth) {
            ++r.correct;
            ++tally.correct;
        }
    }
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.n);
    r.predictions.assign(predictions.begin(), predictions.end());
    return r;
}

std::string knn_oracle(std::span<const LabeledValues> train, const std::vector<std::vector<double>>& query,
                       std::size_t k) {
    if (train.empty()) {
        throw EmptyInput("k-NN needs training data");
    }
    if (k == 0 || k > train.size()) {
        throw ConfigError("k must be in [1, " + std::to_string(train.size()) + "]");
    }
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto& t = train[i].values;
        if (t.size() != query.size() || t.empty()) {
            throw ConfigError("query has " + std::to_string(query.size()) + " dimensions, train series " +
                              std::to_string(i) + " has " + std::to_string(t.size()));
        }
        const auto q = resample(query, t.front().size());
        dist.emplace_back(squared_distance(t, q), i);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    if (k == 1) {
        return train[dist.front().second].label;
    }
    // Vote; ties go to the label whose nearest member ranks first.
    std::vector<std::pair<std::string, std::size_t>> votes;
    for (std::size_t j = 0; j < k; ++j) {
        const auto& label = train[dist[j].second].label;
        auto it = std::find_if(votes.begin(), votes.end(), [&](const auto& v) { return v.first == label; });
        if (it == votes.end()) {
            votes.emplace_back(label, 1);
        } else {
            ++it->second;
        }
    }
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
        if (it->second > best->second) {
            best = it;
        }
    }
    return best->first;
}

EvalReport evaluate_run(const fs::path& run_dir, ModelClient& client, const EvalOptions& options) {
    const auto manifest = manifest_from_json(detail::read_file(run_dir / "manifest.json"));
    auto records = parse_jsonl(detail::read_file(run_dir / "test.jsonl"));
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    const auto choices = read_labels(run_dir);

    std::vector<Prediction> predictions(records.size());
    std::vector<std::exception_ptr> failures(records.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            try {
                const auto resp = classify(client, records[i], choices, run_dir, options.retry);
                predictions[i] = {records[i].id, records[i].answer, extract_answer(resp, choices),
                                  resp.text.value_or("")};
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(options.parallel, 1, std::max<std::size_t>(records.size(), 1));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }
    for (const auto& f : failures) {
        if (f) {
            std::rethrow_exception(f);
        }
    }
    auto r = one_shot_accuracy(predictions);
    r.dataset = manifest.dataset;
    r.scenario_id = manifest.scenario_id;
    return r;
}

std::string report_to_json(const EvalReport& r) {
    ojson j;
    j["dataset"] = r.dataset;
    j["scenario_id"] = r.scenario_id;
    j["n"] = r.n;
    j["correct"] = r.correct;
    j["abstained"] = r.abstained;
    j["accuracy"] = r.accuracy;
    ojson per_class = ojson::object();
    for (const auto& [label, t] : r.per_class) {
        per_class[label] = {{"n", t.n}, {"correct", t.correct}};
    }
    j["per_class"] = std::move(per_class);
    auto preds = ojson::array();
    for (const auto& p : r.predictions) {
        ojson e;
        e["id"] = p.id;
        e["truth"] = p.truth;
        e["predicted"] = p.predicted ? ojson(*p.predicted) : ojson(nullptr);
        e["raw_text"] = p.raw_text;
        preds.push_back(std::move(e));
    }
    j["predictions"] = std::move(preds);
    return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view bytes) {
    try {
        const auto j = nlohmann::json::parse(bytes);
        EvalReport r;
        r.dataset = j.at("dataset").get<std::string>();
        r.scenario_id = j.at("scenario_id").get<std::string>();
        r.n = j.at("n").get<std::size_t>();
        r.correct = j.at("correct").get<std::size_t>();
        r.abstained = j.at("abstained").get<std::size_t>();
        r.accuracy = j.at("accuracy").get<double>();
        for (auto it = j.at("per_class").begin(); it != j.at("per_class").end(); ++it) {
            r.per_class[it.key()] = {it.value().at("n").get<std::size_t>(), it.value().at("correct").get<std::size_t>()};
        }
        for (const auto& e : j.value("predictions", nlohmann::json::array())) {
            Prediction p;
            p.id = e.at("id").get<std::string>();
            p.truth = e.at("truth").get<std::string>();
            if (!e.at("predicted").is_null()) {
                p.predicted = e.at("predicted").get<std::string>();
            }
            p.raw_text = e.value("raw_text", "");
            r.predictions.push_back(std::move(p));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed results JSON: ") + e.what());
    }
}

ReportFormat parse_report_format(std::string_view s) {
    if (s == "md" || s == "markdown") {
        return ReportFormat::Markdown;
    }
    if (s == "csv") {
        return ReportFormat::Csv;
    }
    throw ConfigError("unknown report format '" + std::string(s) + "'");
}

std::string format_percent(double accuracy) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
        throw ConfigError("accuracy outside [0, 1]");
    }
    // Round half up on the basis-point count so 0.8508 stays 85.08.
    const auto bp = static_cast<long long>(std::floor(accuracy * 10000.0 + 0.5 + 1e-9));
    std::ostringstream out;
    out << bp / 100 << '.' << (bp % 100 < 10 ? "0" : "") << bp % 100 << '%';
    return out.str();
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string md_field(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|') {
            out += '\\';
        }
        out += c;
    }
    return out;
}

std::string plot_title(PlotType p) {
    return p == PlotType::Line ? "Line" : "Scatter";
}

std::string prompt_title(PromptMode m) {
    return m == PromptMode::Baseline ? "Baseline" : "With Stats";
}

std::string strategy_title(Strategy s) {
    return s == Strategy::Uniform ? "Uniform" : "Adaptive";
}

} // namespace

std::string report(std::span<const EvalReport> reports, ReportFormat format) {
    static const std::vector<std::string> kHeader{"Dataset",      "Plot Type",      "Prompt Type",
                                                  "Downsampling", "Context Length", "Accuracy"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports) {
        const Scenario s = parse_scenario_id(r.scenario_id);
        rows.push_back({r.dataset, plot_title(s.plot_type), prompt_title(s.prompt_mode),
                        strategy_title(s.downsampling), std::to_string(s.context_length), format_percent(r.accuracy)});
    }
    std::string out;
    if (format == ReportFormat::Csv) {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out += (i ? "," : "") + csv_field(cells[i]);
            }
            out += '\n';
        };
        line(kHeader);
        for (const auto& r : rows) {
            line(r);
        }
        return out;
    }
    auto line = [&](const std::vector<std::string>& cells) {
        out += '|';
        for (const auto& c : cells) {
            out += ' ' + md_field(c) + " |";
        }
        out += '\n';
    };
    line(kHeader);
    out += "|---|---|---|---|---:|---:|\n";
    for (const auto& r : rows) {
        line(r);
    }
    return out;
}

} // namespace tsvlm
