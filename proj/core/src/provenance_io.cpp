#include "nda/provenance_io.hpp"

#include "nda/errors.hpp"

#include <json.hpp>

#include <fstream>

namespace nda {

using nlohmann::json;

void save_provenance(const std::vector<QueryProvenance>& provenance, std::uint64_t fingerprint,
                     const std::vector<std::string>& train_ids, const std::string& path) {
    json root;
    root["fingerprint"] = fingerprint;
    root["train_ids"] = train_ids;
    json queries = json::array();
    for (const QueryProvenance& qp : provenance) {
        json q;
        q["query_id"] = qp.query_id;
        json pairs = json::array();
        for (std::size_t i = 0; i < qp.train_indices.size(); ++i) {
            json pair;
            pair["train_index"] = qp.train_indices[i];
            json entries = json::array();
            for (const ProvenanceEntry& e : qp.entries[i]) {
                entries.push_back({{"query_center", e.query_center},
                                   {"train_center", e.train_center},
                                   {"timestep", e.timestep},
                                   {"scale", e.scale == ScaleTag::low ? "low" : "original"},
                                   {"patch_size", e.patch_size},
                                   {"weight", e.weight}});
            }
            pair["entries"] = std::move(entries);
            pairs.push_back(std::move(pair));
        }
        q["pairs"] = std::move(pairs);
        queries.push_back(std::move(q));
    }
    root["queries"] = std::move(queries);

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write " + path);
    out << root.dump(2) << "\n";
    if (!out) throw data_error("short write on " + path);
}

ProvenanceStore load_provenance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw data_error(path + ": invalid provenance JSON: " + e.what());
    }

    ProvenanceStore store;
    try {
        store.fingerprint = root.at("fingerprint").get<std::uint64_t>();
        store.train_ids = root.at("train_ids").get<std::vector<std::string>>();
        for (const json& q : root.at("queries")) {
            QueryProvenance qp;
            qp.query_id = q.at("query_id").get<std::string>();
            for (const json& pair : q.at("pairs")) {
                qp.train_indices.push_back(pair.at("train_index").get<std::uint32_t>());
                std::vector<ProvenanceEntry> entries;
                for (const json& e : pair.at("entries")) {
                    ProvenanceEntry entry;
                    entry.query_center = e.at("query_center").get<std::uint32_t>();
                    entry.train_center = e.at("train_center").get<std::uint32_t>();
                    entry.timestep = e.at("timestep").get<int>();
                    entry.scale =
                        e.at("scale").get<std::string>() == "low" ? ScaleTag::low
                                                                  : ScaleTag::original;
                    entry.patch_size = e.at("patch_size").get<int>();
                    entry.weight = e.at("weight").get<double>();
                    entries.push_back(entry);
                }
                qp.entries.push_back(std::move(entries));
            }
            store.queries.push_back(std::move(qp));
        }
    } catch (const json::exception& e) {
        throw data_error(path + ": malformed provenance store: " + e.what());
    }
    return store;
}

const QueryProvenance* ProvenanceStore::find(const std::string& query_id) const {
    for (const QueryProvenance& q : queries) {
        if (q.query_id == query_id) return &q;
    }
    return nullptr;
}

} // namespace nda
