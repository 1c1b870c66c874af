#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsvlm::detail {

// Unbiased index in [0, bound) from a 64-bit engine. std::uniform_int_distribution
// is implementation-defined, so splits would differ across standard libraries.
std::uint64_t uniform_index(std::mt19937_64& engine, std::uint64_t bound);

template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& engine) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(engine, i));
        std::swap(items[i - 1], items[j]);
    }
}

// Strict locale-independent real parse of the whole token (surrounding
// blanks allowed). nullopt on garbage or non-finite values.
std::optional<double> parse_real(std::string_view token);

// Shortest round-trip representation.
std::string format_real(double v);

// Fixed decimals, trailing zeros and dot stripped, "-0" normalized to "0".
std::string format_fixed(double v, int precision);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

std::string read_file(const std::filesystem::path& p);
// Writes to a sibling temp file and renames it over `p`.
void write_file_atomic(const std::filesystem::path& p, std::string_view bytes);
void write_file_atomic(const std::filesystem::path& p, std::span<const std::uint8_t> bytes);

class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view bytes);
    void update(std::span<const std::uint8_t> bytes);
    std::string hex_digest();

private:
    void* ctx_;
};

std::string sha256_hex(std::string_view bytes);

// UTC ISO-8601; honors SOURCE_DATE_EPOCH for reproducible manifests.
std::string utc_timestamp();

} // namespace tsvlm::detail
