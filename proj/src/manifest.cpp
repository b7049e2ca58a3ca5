#include "mtvcbf/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mtvcbf {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::uint64_t h, const char* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= kFnvPrime;
    }
    return h;
}

}  // namespace

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("hash_file: cannot open " + path);
    std::uint64_t h = kFnvOffset;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a(h, buf, static_cast<size_t>(in.gcount()));
    return h;
}

std::uint64_t hash_csv_excluding(const std::string& path,
                                 const std::vector<std::string>& drop_columns) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("hash_csv_excluding: cannot open " + path);
    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("hash_csv_excluding: empty file " + path);

    std::vector<bool> keep;
    std::vector<std::string> names;
    {
        std::istringstream ss(header);
        std::string col;
        while (std::getline(ss, col, ','))
            names.push_back(col);
    }
    keep.resize(names.size());
    for (size_t i = 0; i < names.size(); ++i)
        keep[i] = std::find(drop_columns.begin(), drop_columns.end(), names[i]) ==
                  drop_columns.end();

    std::uint64_t h = kFnvOffset;
    const auto hash_row = [&](const std::string& row) {
        std::istringstream ss(row);
        std::string cell;
        size_t idx = 0;
        while (std::getline(ss, cell, ',')) {
            if (idx < keep.size() && keep[idx]) {
                h = fnv1a(h, cell.data(), cell.size());
                h = fnv1a(h, ",", 1);
            }
            ++idx;
        }
        h = fnv1a(h, "\n", 1);
    };
    hash_row(header);
    std::string line;
    while (std::getline(in, line)) hash_row(line);
    return h;
}

void Manifest::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot open " + path);
    out << "command = " << command << "\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
    if (!out) throw std::runtime_error("manifest: write failed for " + path);
}

}  // namespace mtvcbf
