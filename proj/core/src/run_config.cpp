#include "nda/run_config.hpp"

#include "nda/errors.hpp"

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

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) {
        part = trim(part);
        if (!part.empty()) parts.push_back(part);
    }
    return parts;
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw config_error(key + ": expected an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw config_error(key + ": expected a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "off" || value == "no") return false;
    throw config_error(key + ": expected a boolean, got '" + value + "'");
}

// "7" applies one value to every timestep; "100:5,200:7" sets per-timestep
// values and must cover the whole timestep set.
template <typename T, typename Parse>
std::map<int, T> parse_per_timestep(const std::string& key, const std::string& value,
                                    const std::vector<int>& timesteps, Parse parse) {
    std::map<int, T> table;
    if (value.find(':') == std::string::npos) {
        const T v = parse(key, value);
        for (int t : timesteps) table[t] = v;
        return table;
    }
    for (const std::string& pair : split(value, ',')) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) {
            throw config_error(key + ": expected t:value pairs, got '" + pair + "'");
        }
        const int t = parse_int(key, trim(pair.substr(0, colon)));
        table[t] = parse(key, trim(pair.substr(colon + 1)));
    }
    for (int t : timesteps) {
        if (!table.count(t)) {
            throw config_error(key + ": missing entry for timestep " + std::to_string(t));
        }
    }
    return table;
}

void apply_source_key(DatasetSource& src, const std::string& field, const std::string& key,
                      const std::string& value) {
    if (field == "kind") {
        if (value == "cifar_binary") src.kind = SourceKind::cifar_binary;
        else if (value == "image_directory") src.kind = SourceKind::image_directory;
        else if (value == "raw_tensor") src.kind = SourceKind::raw_tensor;
        else throw config_error(key + ": unknown dataset kind '" + value + "'");
    } else if (field == "path") {
        src.path = value;
    } else if (field == "labels") {
        src.label_filter.clear();
        for (const std::string& part : split(value, ',')) {
            src.label_filter.insert(parse_int(key, part));
        }
    } else if (field == "crop") {
        src.crop = parse_int(key, value);
    } else if (field == "resize") {
        src.resize = parse_int(key, value);
    } else if (field == "channels") {
        src.channels = parse_int(key, value);
    } else if (field == "side") {
        src.side = parse_int(key, value);
    } else if (field == "limit") {
        src.limit = static_cast<std::size_t>(parse_int(key, value));
    } else {
        throw config_error("unknown config key: " + key);
    }
}

} // namespace

std::map<std::string, std::string> parse_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open config file " + path);
    std::map<std::string, std::string> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error(path + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
        }
        values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return values;
}

RunConfig make_run_config(const std::map<std::string, std::string>& file_values,
                          const std::map<std::string, std::string>& overrides) {
    std::map<std::string, std::string> merged = file_values;
    for (const auto& [k, v] : overrides) merged[k] = v;

    RunConfig cfg;

    // Timesteps first: per-timestep tables need the final set.
    if (auto it = merged.find("influence.timesteps"); it != merged.end()) {
        cfg.influence.timesteps.clear();
        for (const std::string& part : split(it->second, ',')) {
            cfg.influence.timesteps.push_back(parse_int("influence.timesteps", part));
        }
        // Defaults keyed on the old set no longer apply.
        cfg.influence.patch_size.clear();
        cfg.influence.patch_size_low.clear();
        cfg.influence.gamma.clear();
        for (int t : cfg.influence.timesteps) {
            cfg.influence.patch_size[t] = 5;
            cfg.influence.patch_size_low[t] = 8;
            cfg.influence.gamma[t] = 0.75;
        }
    }

    for (const auto& [key, value] : merged) {
        if (key.rfind("train.", 0) == 0) {
            apply_source_key(cfg.train, key.substr(6), key, value);
        } else if (key.rfind("query.", 0) == 0) {
            apply_source_key(cfg.query, key.substr(6), key, value);
        } else if (key == "schedule.steps") {
            cfg.schedule_steps = parse_int(key, value);
        } else if (key == "schedule.beta_min") {
            cfg.beta_min = parse_double(key, value);
        } else if (key == "schedule.beta_max") {
            cfg.beta_max = parse_double(key, value);
        } else if (key == "influence.timesteps") {
            // handled above
        } else if (key == "influence.patch_size") {
            cfg.influence.patch_size = parse_per_timestep<int>(
                key, value, cfg.influence.timesteps, parse_int);
        } else if (key == "influence.patch_size_low") {
            cfg.influence.patch_size_low = parse_per_timestep<int>(
                key, value, cfg.influence.timesteps, parse_int);
        } else if (key == "influence.window") {
            cfg.influence.window = parse_int(key, value);
        } else if (key == "influence.gamma") {
            cfg.influence.gamma = parse_per_timestep<double>(
                key, value, cfg.influence.timesteps, parse_double);
        } else if (key == "influence.k") {
            cfg.influence.top_k = parse_int(key, value);
        } else if (key == "influence.noise") {
            if (value == "seeded") cfg.influence.noise_mode = NoiseMode::seeded;
            else if (value == "zero") cfg.influence.noise_mode = NoiseMode::zero;
            else throw config_error(key + ": expected 'seeded' or 'zero', got '" + value + "'");
        } else if (key == "influence.seed") {
            cfg.influence.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else if (key == "influence.share_noise") {
            cfg.influence.share_noise_across_timesteps = parse_bool(key, value);
        } else if (key == "influence.draws") {
            cfg.influence.draws = parse_int(key, value);
        } else if (key == "influence.backend") {
            if (value == "fast") cfg.influence.backend = DistanceBackend::fast;
            else if (value == "naive") cfg.influence.backend = DistanceBackend::naive;
            else throw config_error(key + ": expected 'fast' or 'naive', got '" + value + "'");
        } else if (key == "influence.low_variance_rescale") {
            cfg.influence.low_variance_rescale = parse_bool(key, value);
        } else if (key == "influence.patch_batch") {
            cfg.influence.patch_batch = parse_int(key, value);
        } else if (key == "run.output") {
            cfg.output_dir = value;
        } else if (key == "run.workers") {
            cfg.workers = parse_int(key, value);
        } else if (key == "run.checkpoint") {
            cfg.checkpoint = parse_bool(key, value);
        } else if (key == "run.csv") {
            cfg.write_csv = parse_bool(key, value);
        } else if (key == "run.provenance_cap") {
            cfg.provenance_cap = parse_int(key, value);
        } else if (key == "run.provenance_top") {
            cfg.provenance_top = parse_int(key, value);
        } else {
            throw config_error("unknown config key: " + key);
        }
    }
    return cfg;
}

} // namespace nda
