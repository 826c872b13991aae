#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crackfield {

struct FileRecord {
    std::string path;
    std::string sha256;
};

struct StageRecord {
    std::string name;
    double seconds = 0.0;               // informational only
    std::vector<std::string> outputs;   // paths also listed in RunManifest::outputs
};

// provenance record written next to every pipeline output
struct RunManifest {
    std::string tool = "crackfield";
    std::string version;
    std::string subcommand;
    std::vector<std::string> args;
    std::string config_json;          // canonical config the run actually used
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> outputs;
    std::vector<StageRecord> stages;  // multi-stage runs; empty otherwise
    std::uint64_t seed = 0;
    int threads = 0;
    std::string started_utc;          // informational only
    double wall_seconds = 0.0;        // informational only

    // canonical serialization of everything that determines the result;
    // timestamp and timings stay out so reruns hash identically
    std::string hashable_json() const;
    std::string manifest_hash() const;
    std::string to_json() const;      // full document, hash included
};

void write_manifest(const RunManifest& m, const std::string& path);

} // namespace crackfield
