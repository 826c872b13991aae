#include "crackfield/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "crackfield/errors.hpp"
#include "crackfield/hash.hpp"

namespace crackfield {

namespace {

nlohmann::json records_to_json(const std::vector<FileRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const FileRecord& r : records) {
        arr.push_back({{"path", r.path}, {"sha256", r.sha256}});
    }
    return arr;
}

nlohmann::json hashable_fields(const RunManifest& m) {
    nlohmann::json j;
    j["tool"] = m.tool;
    j["version"] = m.version;
    j["subcommand"] = m.subcommand;
    nlohmann::json cfg(nullptr);
    if (!m.config_json.empty()) {
        cfg = nlohmann::json::parse(m.config_json, nullptr, false);
        if (cfg.is_discarded()) cfg = m.config_json;   // keep malformed text verbatim
    }
    // thread width never changes an output byte, so the hash ignores it and
    // reruns at any width hash identically (args go with it: they carry
    // --threads). Both still appear in the written document.
    if (cfg.is_object() && cfg.contains("threads")) cfg["threads"] = 0;
    j["config"] = cfg;
    j["inputs"] = records_to_json(m.inputs);
    j["outputs"] = records_to_json(m.outputs);
    nlohmann::json stages = nlohmann::json::array();
    for (const StageRecord& s : m.stages) {
        stages.push_back({{"name", s.name}, {"outputs", s.outputs}});
    }
    j["stages"] = stages;
    j["seed"] = m.seed;
    return j;
}

} // namespace

std::string RunManifest::hashable_json() const {
    // nlohmann::json keeps keys sorted, so dump() is already canonical
    return hashable_fields(*this).dump();
}

std::string RunManifest::manifest_hash() const { return sha256_hex(hashable_json()); }

std::string RunManifest::to_json() const {
    nlohmann::json j = hashable_fields(*this);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        j["stages"][i]["seconds"] = stages[i].seconds;
    }
    j["args"] = args;
    j["threads"] = threads;
    j["config_sha256"] = sha256_hex(config_json);
    j["started_utc"] = started_utc;
    j["wall_seconds"] = wall_seconds;
    j["manifest_hash"] = manifest_hash();
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << m.to_json();
    if (!out) throw IoError("manifest write failed: " + path);
}

} // namespace crackfield
