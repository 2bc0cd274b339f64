#include "nda/lds_io.hpp"

#include "nda/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nda {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    return cells;
}

} // namespace

LDSInput load_lds_input(const std::string& manifest_path) {
    std::ifstream manifest(manifest_path);
    if (!manifest) throw data_error("cannot open " + manifest_path);
    const auto base = std::filesystem::path(manifest_path).parent_path();

    std::string masks_path, outputs_path;
    std::uint64_t input_fingerprint = 0;
    std::string line;
    while (std::getline(manifest, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw data_error(manifest_path + ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "masks") {
            masks_path = (base / value).string();
        } else if (key == "outputs") {
            outputs_path = (base / value).string();
        } else if (key == "fingerprint") {
            try {
                input_fingerprint = std::stoull(value, nullptr, 16);
            } catch (const std::exception&) {
                throw data_error(manifest_path + ": malformed fingerprint '" + value + "'");
            }
        } else {
            throw data_error(manifest_path + ": unknown manifest key '" + key + "'");
        }
    }
    if (masks_path.empty() || outputs_path.empty()) {
        throw data_error(manifest_path + ": manifest needs both 'masks' and 'outputs'");
    }

    LDSInput input;
    input.fingerprint = input_fingerprint;

    std::ifstream masks(masks_path);
    if (!masks) throw data_error("cannot open " + masks_path);
    while (std::getline(masks, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (input.train_size == 0) {
            input.train_size = line.size();
        } else if (line.size() != input.train_size) {
            throw data_error(masks_path + ": subset " + std::to_string(input.subset_count) +
                             " has " + std::to_string(line.size()) + " entries, expected " +
                             std::to_string(input.train_size));
        }
        for (char c : line) {
            if (c != '0' && c != '1') {
                throw data_error(masks_path + ": mask characters must be 0 or 1");
            }
            input.masks.push_back(c == '1' ? 1 : 0);
        }
        ++input.subset_count;
    }

    std::ifstream outputs(outputs_path);
    if (!outputs) throw data_error("cannot open " + outputs_path);
    if (!std::getline(outputs, line)) throw data_error(outputs_path + ": missing header");
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "subset") {
        throw data_error(outputs_path + ": header must start with 'subset'");
    }
    input.query_ids.assign(header.begin() + 1, header.end());

    std::size_t rows = 0;
    while (std::getline(outputs, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw data_error(outputs_path + ": row " + std::to_string(rows) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
        }
        for (std::size_t i = 1; i < cells.size(); ++i) {
            try {
                input.outputs.push_back(std::stod(cells[i]));
            } catch (const std::exception&) {
                throw data_error(outputs_path + ": non-numeric output '" + cells[i] + "'");
            }
        }
        ++rows;
    }
    if (rows != input.subset_count) {
        throw data_error(outputs_path + ": " + std::to_string(rows) + " output rows but " +
                         std::to_string(input.subset_count) + " mask lines");
    }
    input.validate();
    return input;
}

void save_lds_input(const LDSInput& input, const std::string& manifest_path) {
    const auto base = std::filesystem::path(manifest_path).parent_path();
    const auto stem = std::filesystem::path(manifest_path).stem().string();
    const std::string masks_name = stem + ".masks.txt";
    const std::string outputs_name = stem + ".outputs.csv";

    {
        std::ofstream masks(base / masks_name, std::ios::trunc);
        if (!masks) throw data_error("cannot write mask file for " + manifest_path);
        for (std::size_t m = 0; m < input.subset_count; ++m) {
            for (std::size_t n = 0; n < input.train_size; ++n) {
                masks << (input.mask_at(m, n) ? '1' : '0');
            }
            masks << "\n";
        }
    }
    {
        std::ofstream outputs(base / outputs_name, std::ios::trunc);
        if (!outputs) throw data_error("cannot write output file for " + manifest_path);
        outputs.precision(17);
        outputs << "subset";
        for (const std::string& id : input.query_ids) outputs << "," << id;
        outputs << "\n";
        for (std::size_t m = 0; m < input.subset_count; ++m) {
            outputs << m;
            for (std::size_t q = 0; q < input.query_ids.size(); ++q) {
                outputs << "," << input.output_at(m, q);
            }
            outputs << "\n";
        }
    }
    std::ofstream manifest(manifest_path, std::ios::trunc);
    if (!manifest) throw data_error("cannot write " + manifest_path);
    manifest << "masks = " << masks_name << "\n";
    manifest << "outputs = " << outputs_name << "\n";
    if (input.fingerprint != 0) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(input.fingerprint));
        manifest << "fingerprint = " << buf << "\n";
    }
}

void save_lds_report(const LDSReport& report, const std::vector<std::string>& query_ids,
                     const std::string& csv_path, const std::string& summary_path) {
    {
        std::ofstream csv(csv_path, std::ios::trunc);
        if (!csv) throw data_error("cannot write " + csv_path);
        csv.precision(17);
        csv << "query_id,rho\n";
        for (std::size_t q = 0; q < query_ids.size(); ++q) {
            csv << query_ids[q] << ",";
            if (report.per_query[q]) csv << *report.per_query[q];
            csv << "\n";
        }
    }
    std::ofstream summary(summary_path, std::ios::trunc);
    if (!summary) throw data_error("cannot write " + summary_path);
    summary.precision(6);
    summary << "method: " << report.method_label << "\n";
    summary << "subsets: " << report.subset_count << "\n";
    summary << "queries: " << query_ids.size() << " (" << report.degenerate_count
            << " degenerate, excluded from the mean)\n";
    summary << "LDS mean: " << report.mean * 100.0 << "%\n";
    summary << "LDS std error: " << report.std_error * 100.0 << "%\n";
    summary << "LDS mean |rho|: " << report.mean_abs * 100.0 << "%\n";
}

} // namespace nda
