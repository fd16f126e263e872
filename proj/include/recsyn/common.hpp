#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace recsyn {

/// Broad failure class. The CLI maps each category to its own exit code.
enum class ErrorCategory { io, parse, validation, compute };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}
    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Carries the 1-based line number of the offending input line (0 when unknown).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what)
        : Error(ErrorCategory::validation, what) {}
};

class ComputeError : public Error {
public:
    explicit ComputeError(const std::string& what)
        : Error(ErrorCategory::compute, what) {}
};

const char* category_name(ErrorCategory category) noexcept;

// ---------------------------------------------------------------------------
// Seeded streams
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Stable 64-bit FNV-1a; used to fan a global seed out to named stages.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Derives an independent stream seed from a base seed and a list of indices.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept;

std::uint64_t stage_seed(std::uint64_t global_seed, std::string_view stage) noexcept;

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits, identical on every platform.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) via rejection; n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Fisher-Yates with uniform_index so the permutation is portable across standard libraries.
template <typename T>
void portable_shuffle(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(values[i - 1], values[j]);
    }
}

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// printf-style formatting into a std::string.
std::string strprintf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
std::size_t whitespace_token_count(std::string_view text);

/// Escapes backslash and newline so a document fits on one line; unescape_line inverts it.
std::string escape_line(std::string_view text);
std::string unescape_line(std::string_view text);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Little-endian binary encoding
// ---------------------------------------------------------------------------

class BinaryWriter {
public:
    void put_u32(std::uint32_t v);
    void put_u64(std::uint64_t v);
    void put_f32(float v);
    void put_f64(double v);
    void put_bytes(std::string_view bytes);
    void put_string(std::string_view s);  // u32 length prefix
    const std::string& buffer() const noexcept { return buffer_; }

private:
    std::string buffer_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::string data) : data_(std::move(data)) {}
    std::uint32_t get_u32();
    std::uint64_t get_u64();
    float get_f32();
    double get_f64();
    std::string get_bytes(std::size_t n);
    std::string get_string();
    bool at_end() const noexcept { return pos_ == data_.size(); }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void need(std::size_t n) const;
    std::string data_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Threading
// ---------------------------------------------------------------------------

/// Sets the OpenMP worker count used by every parallel stage (0 = runtime default).
void set_thread_count(int threads);

}  // namespace recsyn
