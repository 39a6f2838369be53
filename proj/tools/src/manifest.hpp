// Run manifests: every command writes one next to its primary output, carrying
// the resolved configuration, derived seeds, input/output hashes, and timing,
// so a run can be reproduced and its outputs checked byte for byte.
#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace lcroll::cli {

// FNV-1a 64 over the file bytes, rendered as 0x-prefixed hex.
std::string file_hash_hex(const std::filesystem::path& path);

struct RunManifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();   // resolved flag values
    nlohmann::json seeds = nlohmann::json::object();    // root + derived seeds
    nlohmann::json inputs = nlohmann::json::object();   // path -> content hash
    nlohmann::json outputs = nlohmann::json::object();  // path -> content hash
    double wall_ms = 0.0;

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace lcroll::cli
