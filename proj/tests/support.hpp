#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "tsvlm/corpus.hpp"
#include "tsvlm/prompt.hpp"
#include "tsvlm/render.hpp"
#include "tsvlm/runner.hpp"
#include "tsvlm/stats.hpp"

namespace tsvlm::fixtures {

// Same generator as tests/oracles/derive.py, so corpora match the oracle bit for bit.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t operator()() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

inline std::string id_for(const std::string& prefix, std::size_t i) {
    std::string digits = std::to_string(i);
    return prefix + "_" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

// n=512 series whose classes differ only on the odd samples of window 3 (w=64).
inline std::vector<TimeSeries> burst_series() {
    SplitMix64 g(20240229);
    std::vector<TimeSeries> out;
    for (std::size_t i = 0; i < 400; ++i) {
        const double sign = i % 2 == 0 ? 1.0 : -1.0;
        std::vector<double> row;
        row.reserve(512);
        for (std::size_t t = 0; t < 512; ++t) {
            const auto d = g();
            const bool burst = t >= 192 && t < 256;
            if (burst && t % 2 == 0) {
                row.push_back((static_cast<double>(d % 33) - 16.0) / 4.0);
            } else if (burst) {
                row.push_back(sign * 2.0 + (static_cast<double>(d % 9) - 4.0) / 16.0);
            } else {
                row.push_back((static_cast<double>(d % 9) - 4.0) / 16.0);
            }
        }
        out.push_back({id_for("burst", i), {std::move(row)}, sign > 0 ? "A" : "B"});
    }
    return out;
}

// Gaussian bumps early ("up") or late ("down") plus small noise, on a 1/16 grid.
inline std::vector<TimeSeries> bump_series(std::size_t count, std::size_t n = 128) {
    SplitMix64 g(4242);
    std::vector<TimeSeries> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double centre = i % 2 == 0 ? 32.0 : 96.0;
        std::vector<double> row;
        for (std::size_t t = 0; t < n; ++t) {
            const auto d = g();
            const double x = static_cast<double>(t) - centre;
            const double bump = std::floor(16.0 * 4.0 * std::exp(-(x * x) / 128.0) + 0.5) / 16.0;
            row.push_back(bump + (static_cast<double>(d % 9) - 4.0) / 16.0);
        }
        out.push_back({id_for("bump", i), {std::move(row)}, i % 2 == 0 ? "up" : "down"});
    }
    return out;
}

inline std::vector<TimeSeries> random_series(std::size_t count, std::size_t n, std::size_t classes,
                                             std::uint64_t seed, std::size_t dims = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> v(-400, 400);
    std::vector<TimeSeries> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<std::vector<double>> rows(dims);
        for (auto& row : rows) {
            for (std::size_t t = 0; t < n; ++t) {
                row.push_back(v(rng) / 16.0);
            }
        }
        out.push_back({id_for("rnd", i), std::move(rows), "c" + std::to_string(i % classes)});
    }
    return out;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("tsvlm_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string read_all(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

// Fixture behind golden_3.jsonl.
inline std::vector<VqaRecord> golden_records() {
    const TimeSeries a{"plain_a", {{2, 3, 4, 5, 10, 3}}, "1"};
    const TimeSeries b{"stats_b", {{0.5, -1.25, 3}}, "2"};
    const TimeSeries c{"multi_c", {{1, 2}, {3, 4}}, "walking"};
    std::vector<SummaryStats> st{summary_stats(b.values[0])};
    return {
        {a.id, image_path(a.id), build_prompt(a, PromptMode::Baseline, std::nullopt).question, a.label},
        {b.id, image_path(b.id), build_prompt(b, PromptMode::WithStats, st).question, b.label},
        {c.id, image_path(c.id), build_prompt(c, PromptMode::Baseline, std::nullopt).question, c.label},
    };
}

inline std::filesystem::path data_dir() { return TSVLM_TEST_DATA; }

} // namespace tsvlm::fixtures
