#pragma once

#include <stdexcept>
#include <string>

namespace nda {

// Error taxonomy mirrors the CLI exit-code contract:
//   config_error -> 2, data_error -> 3, compute_error -> 4.

class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

class compute_error : public std::runtime_error {
public:
    explicit compute_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace nda
