#pragma once

#include "nda/attribution.hpp"

#include <string>

namespace nda {

/// Binary attribution matrix format, all little-endian:
///   magic "NDAM" | u32 version | u64 rows | u64 cols | u64 fingerprint |
///   rows*cols float64 row-major | id table (queries) | id table (train)
/// where an id table is u64 count followed by (u32 length, bytes) per id.
void save_matrix(const AttributionMatrix& matrix, const std::string& path);
AttributionMatrix load_matrix(const std::string& path);

/// CSV export: ids in the first row and first column.
void save_matrix_csv(const AttributionMatrix& matrix, const std::string& path);

} // namespace nda
