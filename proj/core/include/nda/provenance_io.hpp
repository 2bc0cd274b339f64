#pragma once

#include "nda/attribution.hpp"

#include <string>
#include <vector>

namespace nda {

/// JSON provenance store: fingerprint plus, per query, the retained patch
/// matches behind each stored (query, train) pair.
void save_provenance(const std::vector<QueryProvenance>& provenance, std::uint64_t fingerprint,
                     const std::vector<std::string>& train_ids, const std::string& path);

struct ProvenanceStore {
    std::uint64_t fingerprint = 0;
    std::vector<std::string> train_ids;
    std::vector<QueryProvenance> queries;

    const QueryProvenance* find(const std::string& query_id) const;
};

ProvenanceStore load_provenance(const std::string& path);

} // namespace nda
