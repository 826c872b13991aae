#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "crackfield/constitutive.hpp"
#include "crackfield/imaging.hpp"
#include "crackfield/kinematics.hpp"
#include "crackfield/regions.hpp"
#include "crackfield/synth.hpp"

namespace crackfield {

struct CtodConfig {
    double r_min_um = 100.0;
    double r_max_um = 600.0;
    double bin_width_um = 10.0;
    Vec3 tip_um;                   // used when fitting from face points

    void validate() const;         // throws ConfigError
};

struct VolumeWeightConfig {
    int k_vol = 6;
    std::optional<Aabb> calibration_box_um;   // empty: interior-shrunk set bounds

    void validate() const;
};

struct PathsConfig {
    std::string out_dir = ".";
    std::string particles;           // default particle-table input
    std::string scatter_reference;   // raw-volume inputs for detect/link
    std::string scatter_deformed;
    std::string faces;               // face-point table for fit-ctod
};

// Whole-pipeline configuration. JSON on disk; unknown keys are rejected with
// the full key path; every physical quantity carries its unit in the key
// name. Environment overrides: CRACKFIELD_<SECTION>__<KEY>=value (double
// underscore separates nesting levels, e.g. CRACKFIELD_MATERIAL__MU_PA).
struct PipelineConfig {
    MaterialModel material;
    EstimatorConfig estimator;
    RegionSpec region;
    VolumeWeightConfig volume_weights;
    CtodConfig ctod;
    ImagingConfig imaging;
    SteppedCrackPhantom phantom;
    std::uint64_t seed = 0;
    int threads = 0;
    double strict_invalid_fraction = 0.05;
    PathsConfig paths;

    // validates every section except `phantom`, which only generation stages
    // need fully specified (they call phantom.validate() themselves)
    void validate() const;
    std::string canonical_json() const;   // every field explicit, keys sorted
};

// Parse + validate. `source` names the origin for error messages.
PipelineConfig parse_config(const std::string& json_text, const std::string& source);

// File load; applies CRACKFIELD_* environment overrides before validation
// unless apply_env is false.
PipelineConfig load_config(const std::string& path, bool apply_env = true);

void write_config(const PipelineConfig& cfg, const std::string& path);

} // namespace crackfield
