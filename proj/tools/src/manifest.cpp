#include "manifest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lcroll::cli {

std::string file_hash_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": missing file");
    std::uint64_t hash = 14695981039346656037ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ULL;
        }
    }
    char hex[20];
    std::snprintf(hex, sizeof hex, "0x%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

void RunManifest::add_input(const std::filesystem::path& path) {
    inputs[path.string()] = file_hash_hex(path);
}

void RunManifest::add_output(const std::filesystem::path& path) {
    outputs[path.string()] = file_hash_hex(path);
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["command"] = manifest.command;
    j["config"] = manifest.config;
    j["seeds"] = manifest.seeds;
    j["inputs"] = manifest.inputs;
    j["outputs"] = manifest.outputs;
    j["wall_ms"] = manifest.wall_ms;
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
}

}  // namespace lcroll::cli
