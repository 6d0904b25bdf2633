#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

// Round-trip-exact text for CSV output: shortest decimal form that parses
// back to the identical double, so replotting never re-introduces noise and
// repeated runs are byte-comparable.

namespace qcd::csv {

inline std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string format_u64(std::uint64_t x) {
    char buf[24];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

// FNV-1a, stable across platforms and runs; used to stamp rows with the
// configuration that produced them.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

} // namespace qcd::csv
