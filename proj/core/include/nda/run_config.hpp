#pragma once

#include "nda/config.hpp"
#include "nda/dataset_io.hpp"

#include <map>
#include <string>

namespace nda {

/// Everything one attribution run needs, assembled from a flat key=value
/// config file plus command-line overrides of the same keys.
struct RunConfig {
    DatasetSource train;
    DatasetSource query;
    int schedule_steps = 1000;
    double beta_min = 1e-4;
    double beta_max = 0.02;
    InfluenceConfig influence;
    std::string output_dir = "nda-out";
    int workers = 0;
    bool checkpoint = true;
    bool write_csv = false;
    int provenance_cap = 16;
    int provenance_top = 8;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys are
/// config errors. See the README for the key schema.
std::map<std::string, std::string> parse_key_value_file(const std::string& path);

/// Builds a RunConfig from file values overlaid with override values
/// (overrides win). Both maps use the same key names.
RunConfig make_run_config(const std::map<std::string, std::string>& file_values,
                          const std::map<std::string, std::string>& overrides);

} // namespace nda
