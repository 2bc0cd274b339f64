#include "nda/matrix_io.hpp"

#include "nda/errors.hpp"

#include <cstring>
#include <fstream>

namespace nda {

namespace {

constexpr char kMagic[4] = {'N', 'D', 'A', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_ids(std::ofstream& out, const std::vector<std::string>& ids) {
    const std::uint64_t count = ids.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const std::string& id : ids) {
        const std::uint32_t len = static_cast<std::uint32_t>(id.size());
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(id.data(), len);
    }
}

std::vector<std::string> read_ids(std::ifstream& in, const std::string& path) {
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    std::vector<std::string> ids(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        ids[i].resize(len);
        in.read(ids[i].data(), len);
    }
    if (!in) throw data_error(path + ": truncated id table");
    return ids;
}

} // namespace

void save_matrix(const AttributionMatrix& matrix, const std::string& path) {
    if (matrix.scores.size() != matrix.rows() * matrix.cols()) {
        throw compute_error("matrix shape does not match its id tables");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write " + path);
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    const std::uint64_t rows = matrix.rows(), cols = matrix.cols();
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(&matrix.fingerprint), sizeof(matrix.fingerprint));
    out.write(reinterpret_cast<const char*>(matrix.scores.data()),
              static_cast<std::streamsize>(matrix.scores.size() * sizeof(double)));
    write_ids(out, matrix.query_ids);
    write_ids(out, matrix.train_ids);
    if (!out) throw data_error("short write on " + path);
}

AttributionMatrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw data_error(path + ": not an NDAM matrix file");
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion) {
        throw data_error(path + ": unsupported NDAM version " + std::to_string(version));
    }
    std::uint64_t rows = 0, cols = 0;
    AttributionMatrix matrix;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    in.read(reinterpret_cast<char*>(&matrix.fingerprint), sizeof(matrix.fingerprint));
    matrix.scores.resize(rows * cols);
    in.read(reinterpret_cast<char*>(matrix.scores.data()),
            static_cast<std::streamsize>(matrix.scores.size() * sizeof(double)));
    if (!in) throw data_error(path + ": truncated score block");
    matrix.query_ids = read_ids(in, path);
    matrix.train_ids = read_ids(in, path);
    if (matrix.query_ids.size() != rows || matrix.train_ids.size() != cols) {
        throw data_error(path + ": id tables do not match the declared shape");
    }
    return matrix;
}

void save_matrix_csv(const AttributionMatrix& matrix, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot write " + path);
    out.precision(17);
    out << "query_id";
    for (const std::string& id : matrix.train_ids) out << "," << id;
    out << "\n";
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        out << matrix.query_ids[r];
        for (std::size_t c = 0; c < matrix.cols(); ++c) out << "," << matrix.at(r, c);
        out << "\n";
    }
    if (!out) throw data_error("short write on " + path);
}

} // namespace nda
