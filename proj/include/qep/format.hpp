#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "qep/errors.hpp"

namespace qep {

// Shortest round-trip decimal form of a double; keeps every serialized
// number byte-deterministic and exactly reparseable.
inline std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& s, const std::string& context) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw ParseError(context + ": bad number '" + s + "'");
    }
    return v;
}

}  // namespace qep
