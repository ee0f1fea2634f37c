#include "poolforge/csv.hpp"

#include <cmath>
#include <cstdio>

namespace poolforge {

std::string csv_num(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace poolforge
