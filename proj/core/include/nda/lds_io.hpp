#pragma once

#include "nda/lds.hpp"

#include <string>

namespace nda {

/// LDS input on disk is a small text manifest:
///   masks = <path to subset mask file>
///   outputs = <path to model output CSV>
/// Relative paths resolve against the manifest directory. The mask file has
/// one 0/1 line per subset (N characters); the output CSV has a header
/// "subset,<query id>,..." and one row per subset.
LDSInput load_lds_input(const std::string& manifest_path);

/// Writes masks, outputs and the manifest; paths derive from the stem.
void save_lds_input(const LDSInput& input, const std::string& manifest_path);

/// Per-query rho CSV ("query_id,rho" with empty rho for degenerate queries)
/// plus a short plain-text summary next to it.
void save_lds_report(const LDSReport& report, const std::vector<std::string>& query_ids,
                     const std::string& csv_path, const std::string& summary_path);

} // namespace nda
