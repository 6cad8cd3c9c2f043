#pragma once

#include <iosfwd>
#include <string>

#include "krysp/formats.hpp"

namespace krysp {

/// Reads a Matrix Market coordinate file (real or integer entries, general or
/// symmetric). Symmetric storage is expanded to the full pattern, 1-based
/// indices become 0-based and duplicate entries are summed.
CooMatrix read_matrix_market(const std::string& path);
CooMatrix read_matrix_market(std::istream& in);

/// Writes coordinate/real/general with round-trip-exact values.
void write_matrix_market(const std::string& path, const CooMatrix& m);
void write_matrix_market(std::ostream& out, const CooMatrix& m);

}  // namespace krysp
