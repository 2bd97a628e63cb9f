#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace convrank {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file content. Carries path and 1-based line number in the message.
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input that violates a data contract (duplicate id,
// dangling reference, uncovered pair, ...).
struct DataError : Error {
    using Error::Error;
};

// Tensor shape disagreement.
struct DimensionError : Error {
    using Error::Error;
};

// Bad run configuration (empty training set, invalid flag combination, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem-level failure: missing file, unreadable path, short read.
struct IoError : Error {
    using Error::Error;
};

inline constexpr const char* kToolName = "convrank";
inline constexpr const char* kToolVersion = "0.1.0";

namespace detail {

inline std::string quoted(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 2);
    out.push_back('`');
    out.append(s);
    out.push_back('`');
    return out;
}

inline long long parse_int(std::string_view s, std::string_view what) {
    long long v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) {
        throw ParseError("expected an integer for " + std::string(what) + ", got " + quoted(s));
    }
    return v;
}

inline double parse_real(std::string_view s, std::string_view what) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) {
        throw ParseError("expected a number for " + std::string(what) + ", got " + quoted(s));
    }
    return v;
}

// FNV-1a, used for vocabulary hashing and the checkpoint trailer. The raw
// form carries its own name: overloading it against the string_view one lets
// fnv1a("lit", seed) silently bind (pointer, count) and read past the buffer.
inline std::uint64_t fnv1a_bytes(const void* data, std::size_t n,
                                 std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a_bytes(s.data(), s.size(), h);
}

// Unicode code point count of a UTF-8 string. Continuation bytes (10xxxxxx)
// do not start a code point; malformed bytes count as one each.
inline std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

}  // namespace detail
}  // namespace convrank
