#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace bdeu {

// Shortest round-trip decimal form of a double. Used by every CSV writer so
// that identical runs produce byte-identical files.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace bdeu
