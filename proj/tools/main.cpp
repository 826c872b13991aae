#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crackfield/errors.hpp"
#include "crackfield/io/config.hpp"
#include "crackfield/manifest.hpp"
#include "stages.hpp"

namespace {

using namespace crackfield;
using namespace crackfield::cli;

// 0 success; 2 config/usage, 3 unreadable or malformed inputs, 4 numerical
// failure, 5 anything else
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitInternal = 5;

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// input resolution: explicit flag, then the config's paths section, then a
// conventional name in the output directory left by an earlier stage
std::string resolve_input(const std::string& cli_value, const std::string& cfg_value,
                          const std::string& out_dir_fallback, const RunContext& ctx,
                          const std::string& flag, const std::string& cfg_key) {
    if (!cli_value.empty()) return cli_value;
    if (!cfg_value.empty()) return cfg_value;
    if (!out_dir_fallback.empty()) {
        const std::string p = ctx.out_path(out_dir_fallback);
        if (std::filesystem::exists(p)) return p;
    }
    std::string msg = "no input: give " + flag;
    if (!cfg_key.empty()) msg += " or set " + cfg_key + " in the config";
    if (!out_dir_fallback.empty()) msg += " (or run the producing stage into this --out-dir first)";
    throw ConfigError(msg);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crackfield: mechanical state around stepped cracks from tracked particles"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(CRACKFIELD_VERSION));

    std::string config_path;
    std::string out_dir_cli;
    int threads_cli = 0;
    std::uint64_t seed_cli = 0;
    bool strict = false;
    auto* config_opt =
        app.add_option("--config", config_path,
                       "JSON pipeline config; CRACKFIELD_<SECTION>__<KEY> env vars override");
    auto* threads_opt =
        app.add_option("--threads", threads_cli, "worker threads, 0 = hardware concurrency");
    auto* seed_opt = app.add_option("--seed", seed_cli, "RNG seed (overrides the config)");
    app.add_flag("--strict", strict,
                 "fail (exit 4) when the invalid-sample fraction exceeds the config limit");
    auto* out_dir_opt = app.add_option("--out-dir", out_dir_cli,
                                       "output directory, created if missing");

    std::function<std::vector<std::string>(RunContext&)> runner;
    std::string sub_name;

    AffineArgs affine;
    auto* sc_affine = app.add_subcommand("synth-affine", "uniform points under an affine map");
    sc_affine->add_option("--n", affine.n, "particle count");
    sc_affine->add_option("--f0", affine.f0, "deformation gradient, 9 row-major values")
        ->delimiter(',');
    sc_affine->add_option("--translate-um", affine.translate_um, "translation, um")
        ->delimiter(',');
    sc_affine->add_option("--lo-um", affine.lo_um, "domain lower corner, um")->delimiter(',');
    sc_affine->add_option("--hi-um", affine.hi_um, "domain upper corner, um")->delimiter(',');
    sc_affine->callback([&] {
        sub_name = "synth-affine";
        runner = [&](RunContext& c) { return stage_synth_affine(c, affine); };
    });

    LefmArgs lefm;
    auto* sc_lefm =
        app.add_subcommand("synth-lefm", "Williams mode-I field with analytic crack faces");
    sc_lefm->add_option("--n", lefm.n, "particle count");
    sc_lefm->add_option("--g", lefm.g_j_m2, "energy release rate, J/m^2");
    sc_lefm->add_option("--k1", lefm.k1_pa_sqrt_m, "stress intensity, Pa sqrt(m); overrides --g");
    sc_lefm->add_option("--tip-um", lefm.tip_um, "crack tip position, um")->delimiter(',');
    sc_lefm->add_option("--lo-um", lefm.lo_um, "domain lower corner, um")->delimiter(',');
    sc_lefm->add_option("--hi-um", lefm.hi_um, "domain upper corner, um")->delimiter(',');
    sc_lefm->add_option("--n-face", lefm.n_face, "face points per crack face");
    sc_lefm->add_option("--face-r-max-um", lefm.face_r_max_um, "face extent behind the tip, um");
    sc_lefm->callback([&] {
        sub_name = "synth-lefm";
        runner = [&](RunContext& c) { return stage_synth_lefm(c, lefm); };
    });

    auto* sc_stepped = app.add_subcommand(
        "synth-stepped", "stepped-crack phantom from the config's phantom section");
    sc_stepped->callback([&] {
        sub_name = "synth-stepped";
        runner = [&](RunContext& c) { return stage_synth_stepped(c); };
    });

    std::string render_particles;
    bool render_fluorescence = false;
    auto* sc_render = app.add_subcommand("render", "synthetic light-sheet stacks");
    sc_render->add_option("--particles", render_particles, "particle table to image");
    sc_render->add_flag("--fluorescence", render_fluorescence,
                        "also write the fluorescence channel");
    sc_render->callback([&] {
        sub_name = "render";
        runner = [&](RunContext& c) {
            const std::string p = resolve_input(render_particles, c.cfg.paths.particles, "", c,
                                                "--particles", "paths.particles");
            return stage_render(c, p, render_fluorescence);
        };
    });

    std::string detect_volume;
    std::string detect_out = "blobs.csv";
    auto* sc_detect = app.add_subcommand("detect", "blob detection on a raw volume");
    sc_detect->add_option("--volume", detect_volume, "raw volume to scan");
    sc_detect->add_option("--out", detect_out, "output table name inside --out-dir");
    sc_detect->callback([&] {
        sub_name = "detect";
        runner = [&](RunContext& c) {
            const std::string p =
                resolve_input(detect_volume, c.cfg.paths.scatter_reference, "", c, "--volume",
                              "paths.scatter_reference");
            return stage_detect(c, p, detect_out);
        };
    });

    std::string link_ref, link_def;
    auto* sc_link = app.add_subcommand("link", "match reference and deformed blob tables");
    sc_link->add_option("--ref", link_ref, "reference-frame blob table")->required();
    sc_link->add_option("--def", link_def, "deformed-frame blob table")->required();
    sc_link->callback([&] {
        sub_name = "link";
        runner = [&](RunContext& c) { return stage_link(c, link_ref, link_def); };
    });

    std::string gradient_particles;
    auto* sc_gradient =
        app.add_subcommand("gradient", "per-particle deformation gradients (WLS)");
    sc_gradient->add_option("--particles", gradient_particles, "linked particle table");
    sc_gradient->callback([&] {
        sub_name = "gradient";
        runner = [&](RunContext& c) {
            const std::string p = resolve_input(gradient_particles, c.cfg.paths.particles,
                                                "linked_particles.csv", c, "--particles",
                                                "paths.particles");
            return stage_gradient(c, p);
        };
    });

    std::string energy_gradient;
    auto* sc_energy = app.add_subcommand("energy", "strain energy density and stretch fields");
    sc_energy->add_option("--gradient", energy_gradient, "gradient table from `gradient`");
    sc_energy->callback([&] {
        sub_name = "energy";
        runner = [&](RunContext& c) {
            const std::string p =
                resolve_input(energy_gradient, "", "gradient.csv", c, "--gradient", "");
            return stage_energy(c, p);
        };
    });

    std::string region_energy_in;
    auto* sc_region =
        app.add_subcommand("region-energy", "integrate W over the configured region");
    sc_region->add_option("--energy", region_energy_in, "energy table from `energy`");
    sc_region->callback([&] {
        sub_name = "region-energy";
        runner = [&](RunContext& c) {
            const std::string p =
                resolve_input(region_energy_in, "", "energy.csv", c, "--energy", "");
            return stage_region_energy(c, p);
        };
    });

    std::string ctod_faces, ctod_tip_meta;
    auto* sc_ctod = app.add_subcommand("fit-ctod", "parabolic CTOD fit to crack-face points");
    sc_ctod->add_option("--faces", ctod_faces, "face-point table");
    sc_ctod->add_option("--tip-from-meta", ctod_tip_meta,
                        "JSON with tip_um (overrides ctod.tip_um)");
    sc_ctod->callback([&] {
        sub_name = "fit-ctod";
        runner = [&](RunContext& c) {
            const std::string p =
                resolve_input(ctod_faces, c.cfg.paths.faces, "", c, "--faces", "paths.faces");
            return stage_fit_ctod(c, p, ctod_tip_meta);
        };
    });

    std::string regress_points;
    auto* sc_regress =
        app.add_subcommand("regress", "least squares G_c vs E_lig over a points table");
    sc_regress->add_option("--points", regress_points, "table with e_lig_j and gc_j_m2 columns")
        ->required();
    sc_regress->callback([&] {
        sub_name = "regress";
        runner = [&](RunContext& c) { return stage_regress(c, regress_points); };
    });

    std::string report_regression;
    auto* sc_report = app.add_subcommand("report", "plain-text summary of a regression");
    sc_report->add_option("--regression", report_regression, "regression JSON from `regress`");
    sc_report->callback([&] {
        sub_name = "report";
        runner = [&](RunContext& c) {
            const std::string p =
                resolve_input(report_regression, "", "regression.json", c, "--regression", "");
            return stage_report(c, p);
        };
    });

    bool pipeline_cache = false;
    auto* sc_pipeline = app.add_subcommand(
        "pipeline", "synth-stepped, gradient, energy, region-energy, fit-ctod in one run");
    sc_pipeline->add_flag("--cache", pipeline_cache,
                          "skip stages whose inputs and outputs are unchanged");
    sc_pipeline->callback([&] {
        sub_name = "pipeline";
        runner = [&](RunContext& c) { return stage_pipeline(c, pipeline_cache); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        PipelineConfig cfg = config_opt->count() ? load_config(config_path)
                                                 : parse_config("{}", "<defaults>");
        if (threads_opt->count()) cfg.threads = threads_cli;
        if (seed_opt->count()) cfg.seed = seed_cli;

        RunContext ctx;
        ctx.cfg = cfg;
        ctx.out_dir = out_dir_opt->count() ? out_dir_cli : cfg.paths.out_dir;
        if (ctx.out_dir.empty()) ctx.out_dir = ".";
        std::filesystem::create_directories(ctx.out_dir);
        ctx.strict = strict;
        ctx.threads = cfg.threads;
        ctx.seed = cfg.seed;
        ctx.manifest.version = CRACKFIELD_VERSION;
        ctx.manifest.subcommand = sub_name;
        for (int i = 1; i < argc; ++i) ctx.manifest.args.emplace_back(argv[i]);
        ctx.manifest.config_json = cfg.canonical_json();
        ctx.manifest.seed = cfg.seed;
        ctx.manifest.threads = cfg.threads;
        ctx.manifest.started_utc = utc_now();

        const auto t0 = std::chrono::steady_clock::now();
        runner(ctx);
        ctx.manifest.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::string manifest_name = "manifest_" + sub_name + ".json";
        for (char& c : manifest_name) {
            if (c == '-') c = '_';
        }
        const std::string manifest_path = ctx.out_path(manifest_name);
        write_manifest(ctx.manifest, manifest_path);
        std::printf("manifest %s -> %s\n", ctx.manifest.manifest_hash().c_str(),
                    manifest_path.c_str());
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitInput;
    } catch (const InvalidInputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitInput;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInternal;
    }
}
