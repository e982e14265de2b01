#pragma once

#include <charconv>
#include <cstdlib>
#include <string>
#include <system_error>

#include "crashsev/errors.hpp"

namespace crashsev {

// Shortest decimal form that round-trips to the same double. Used everywhere
// a double is written to a text artifact, so outputs stay byte-deterministic.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Strict double parse: the whole string must be consumed.
inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ContractError("not a valid number: '" + s + "'");
    return v;
}

inline bool try_parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc{} && res.ptr == end;
}

}  // namespace crashsev
