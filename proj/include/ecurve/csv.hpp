#ifndef ECURVE_CSV_HPP_
#define ECURVE_CSV_HPP_

#include <string>

#include "ecurve/data.hpp"

namespace ecurve {

// Header row required; blank cells read as missing. Parse failures report
// the offending line and column.
Table read_csv(const std::string& path);

void write_csv(const Table& table, const std::string& path);

}  // namespace ecurve

#endif  // ECURVE_CSV_HPP_
