#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "yieldcast/core/error.hpp"

namespace yieldcast::pipeline {

inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw Error("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

struct ManifestEntry {
    std::string path; ///< relative, '/' separated
    std::uintmax_t bytes = 0;
    std::string sha256;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Every regular file under `root` except those named in `exclude`, sorted by path.
inline std::vector<ManifestEntry> scan_artifacts(const std::filesystem::path& root, const std::set<std::string>& exclude) {
    std::vector<ManifestEntry> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = std::filesystem::relative(e.path(), root).generic_string();
        if (exclude.count(rel)) continue;
        const std::string data = read_file(e.path());
        out.push_back({rel, data.size(), sha256_hex(data)});
    }
    std::sort(out.begin(), out.end(), [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    return out;
}

inline std::string write_manifest_json(const std::string& run_id, const std::vector<ManifestEntry>& entries) {
    nlohmann::ordered_json doc;
    doc["run_id"] = run_id;
    doc["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["path"] = e.path;
        j["bytes"] = e.bytes;
        j["sha256"] = e.sha256;
        doc["artifacts"].push_back(std::move(j));
    }
    return doc.dump(1) + "\n";
}

inline std::vector<ManifestEntry> parse_manifest_json(std::string_view text) {
    std::vector<ManifestEntry> out;
    try {
        const auto doc = nlohmann::json::parse(text);
        for (const auto& j : doc.at("artifacts"))
            out.push_back({j.at("path").get<std::string>(), j.at("bytes").get<std::uintmax_t>(), j.at("sha256").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
    return out;
}

} // namespace yieldcast::pipeline
