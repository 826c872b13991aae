#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crackfield/io/config.hpp"
#include "crackfield/manifest.hpp"

namespace crackfield::cli {

// Shared state of one tool invocation. Stage functions read and write files
// only — `pipeline` composes them exactly as manual runs would, so chained
// output is byte-identical to running the stages one at a time.
struct RunContext {
    PipelineConfig cfg;
    std::string out_dir;
    bool strict = false;
    int threads = 0;
    std::uint64_t seed = 0;
    RunManifest manifest;

    std::string out_path(const std::string& name) const;
    void record_input(const std::string& path);      // hashes the file
    void record_output(const std::string& path);
};

struct AffineArgs {
    std::size_t n = 10000;
    std::vector<double> f0 = {1, 0, 0, 0, 1, 0, 0, 0, 1};   // row-major
    std::vector<double> translate_um = {0, 0, 0};
    std::vector<double> lo_um = {0, 0, 0};
    std::vector<double> hi_um = {500, 500, 500};
};

struct LefmArgs {
    std::size_t n = 50000;
    double g_j_m2 = 10.0;
    double k1_pa_sqrt_m = 0.0;     // > 0 overrides g_j_m2
    std::vector<double> tip_um = {0, 0, 30};
    std::vector<double> lo_um = {-600, -600, 0};
    std::vector<double> hi_um = {600, 600, 60};
    std::size_t n_face = 400;
    double face_r_max_um = 600.0;
};

// each stage returns the paths it wrote, already recorded in the manifest
std::vector<std::string> stage_synth_affine(RunContext& ctx, const AffineArgs& args);
std::vector<std::string> stage_synth_lefm(RunContext& ctx, const LefmArgs& args);
std::vector<std::string> stage_synth_stepped(RunContext& ctx);
std::vector<std::string> stage_render(RunContext& ctx, const std::string& particles_path,
                                      bool fluorescence);
std::vector<std::string> stage_detect(RunContext& ctx, const std::string& volume_path,
                                      const std::string& out_name);
std::vector<std::string> stage_link(RunContext& ctx, const std::string& ref_blobs_path,
                                    const std::string& def_blobs_path);
std::vector<std::string> stage_gradient(RunContext& ctx, const std::string& particles_path);
std::vector<std::string> stage_energy(RunContext& ctx, const std::string& gradient_path);
std::vector<std::string> stage_region_energy(RunContext& ctx, const std::string& energy_path);
std::vector<std::string> stage_fit_ctod(RunContext& ctx, const std::string& faces_path,
                                        const std::string& tip_meta_path);
std::vector<std::string> stage_regress(RunContext& ctx, const std::string& points_path);
std::vector<std::string> stage_report(RunContext& ctx, const std::string& regression_path);
std::vector<std::string> stage_pipeline(RunContext& ctx, bool cache);

} // namespace crackfield::cli
