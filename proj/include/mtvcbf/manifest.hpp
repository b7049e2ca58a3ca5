#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mtvcbf {

// FNV-1a over the file bytes.
std::uint64_t hash_file(const std::string& path);

// Same, but skipping the named CSV columns (wall-time columns change between
// otherwise identical runs).
std::uint64_t hash_csv_excluding(const std::string& path,
                                 const std::vector<std::string>& drop_columns);

// Ordered key-value run record. Written once before any outputs and rewritten
// with artifact hashes afterwards.
struct Manifest {
    std::string command;
    std::vector<std::pair<std::string, std::string>> entries;

    void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
    void write(const std::string& path) const;
};

}  // namespace mtvcbf
