#pragma once

#include <cstdio>
#include <ostream>

namespace dlab {

// Reals in CSV output: 17 significant digits, enough to round-trip a double.
inline void write_real(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

}  // namespace dlab
