#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "io.hpp"

namespace bsccs {

/// FNV-1a over a file's bytes; cheap content fingerprint for manifests.
inline std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw input_error("cannot open '" + path + "' for digesting");
    }
    std::uint64_t hash = 0xCBF29CE484222325ull;
    char buffer[1 << 16];
    while (in.read(buffer, sizeof buffer) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize p = 0; p < got; ++p) {
            hash ^= static_cast<unsigned char>(buffer[p]);
            hash *= 0x100000001B3ull;
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx",
                  static_cast<unsigned long long>(hash));
    return out;
}

/// Ordered key-value record of one run: every option, every seed, and a
/// digest of every input and output file.  Written next to the outputs so
/// any result can be reproduced from its directory alone.
class RunManifest {
public:
    void set(const std::string& key, const std::string& value) {
        entries_.emplace_back(key, value);
    }
    void set(const std::string& key, double value) {
        entries_.emplace_back(key, format_double(value));
    }
    void set(const std::string& key, long long value) {
        entries_.emplace_back(key, std::to_string(value));
    }
    void set(const std::string& key, int value) {
        entries_.emplace_back(key, std::to_string(value));
    }
    void set(const std::string& key, std::uint64_t value) {
        entries_.emplace_back(key, std::to_string(value));
    }
    void set_file(const std::string& key, const std::string& path) {
        set(key, path);
        set(key + "_digest", file_digest(path));
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) {
            throw input_error("cannot open '" + path + "' for writing");
        }
        for (const auto& [key, value] : entries_) {
            out << key << '\t' << value << '\n';
        }
        if (!out) {
            throw input_error("failed while writing '" + path + "'");
        }
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace bsccs
