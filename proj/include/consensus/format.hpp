#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>

namespace consensus {

// Shortest round-trip decimal form; "inf"/"-inf"/"nan" for non-finite values.
// Used by every CSV writer so output files are byte-deterministic.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string format_u64(std::uint64_t v) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace consensus
