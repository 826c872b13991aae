// end-to-end checks of the installed tool: exit codes, rerun determinism,
// thread invariance, and `pipeline` matching the manual stage sequence byte
// for byte. Each case shells out to the binary CMake points us at.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "crackfield/hash.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = CRACKFIELD_CLI_PATH;

fs::path case_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "crackfield-cli-tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    REQUIRE(out.good());
}

json manifest_of(const fs::path& dir, const std::string& name) {
    return json::parse(slurp(dir / name));
}

// a config whose phantom is small enough for test turnaround but still has a
// real ligament, opened faces, and a fit window the faces cover
std::string pipeline_config(std::uint64_t seed) {
    json cfg;
    cfg["seed"] = seed;
    cfg["phantom"] = {
        {"bounds_um", {{"lo_um", {0, -250, 0}}, {"hi_um", {800, 250, 600}}}},
        {"front1_x_um", 575.0},
        {"front1_z_lo_um", 0.0},
        {"front1_z_hi_um", 475.0},
        {"front2_x_um", 225.0},
        {"front2_z_lo_um", 125.0},
        {"front2_z_hi_um", 600.0},
        {"density_per_um3", 1e-4},
        {"lig_amplification", 3.75},
        {"k_far_pa_sqrt_m", 725.0},
    };
    cfg["region"] = {
        {"kind", "ligament"},
        {"ligament",
         {{"x_back_um", 240.0},
          {"x_front_um", 560.0},
          {"z_lo_um", 140.0},
          {"z_hi_um", 460.0},
          {"y_center_um", 0.0},
          {"y_half_width_um", 50.0}}},
    };
    return cfg.dump(2);
}

} // namespace

TEST_CASE("version and help") {
    const fs::path dir = case_dir("version");
    CHECK(run_cli("--version", dir / "v.log") == 0);
    CHECK(run_cli("--help", dir / "h.log") == 0);
    CHECK(slurp(dir / "h.log").find("pipeline") != std::string::npos);
}

TEST_CASE("synth-affine reruns and seeds") {
    const fs::path dir = case_dir("affine-rerun");
    const std::string base = "synth-affine --n 2000 --seed 7 --out-dir " + dir.string();
    REQUIRE(run_cli(base, dir / "run1.log") == 0);
    const std::string bytes1 = slurp(dir / "affine_particles.csv");
    const std::string hash1 = manifest_of(dir, "manifest_synth_affine.json")["manifest_hash"];

    REQUIRE(run_cli(base, dir / "run2.log") == 0);
    CHECK(slurp(dir / "affine_particles.csv") == bytes1);
    CHECK(manifest_of(dir, "manifest_synth_affine.json")["manifest_hash"] == hash1);

    REQUIRE(run_cli("synth-affine --n 2000 --seed 8 --out-dir " + dir.string(),
                    dir / "run3.log") == 0);
    CHECK(slurp(dir / "affine_particles.csv") != bytes1);
    CHECK(manifest_of(dir, "manifest_synth_affine.json")["manifest_hash"] != hash1);
}

TEST_CASE("exit codes by failure class") {
    const fs::path dir = case_dir("exit-codes");
    const std::string od = " --out-dir " + dir.string();

    // usage
    CHECK(run_cli("frobnicate" + od, dir / "a.log") == 2);
    CHECK(run_cli("synth-affine --no-such-flag" + od, dir / "b.log") == 2);

    // config
    CHECK(run_cli("--config " + (dir / "nope.json").string() + " synth-affine" + od,
                  dir / "c.log") == 2);
    spit(dir / "bad.json", R"({"materiall": {}})");
    CHECK(run_cli("--config " + (dir / "bad.json").string() + " synth-affine" + od,
                  dir / "d.log") == 2);
    spit(dir / "notjson.json", "{nope");
    CHECK(run_cli("--config " + (dir / "notjson.json").string() + " synth-affine" + od,
                  dir / "e.log") == 2);

    // inputs
    CHECK(run_cli("gradient --particles " + (dir / "missing.csv").string() + od,
                  dir / "f.log") == 3);
    spit(dir / "junk.csv", "a,b,c\n1,2,3\n");
    CHECK(run_cli("gradient --particles " + (dir / "junk.csv").string() + od,
                  dir / "g.log") == 3);

    // numerical: 6 particles cannot support the estimator stencil, so every
    // sample is flagged; fine without --strict, exit 4 with it
    REQUIRE(run_cli("synth-affine --n 6 --seed 3" + od, dir / "h.log") == 0);
    const std::string tiny = (dir / "affine_particles.csv").string();
    CHECK(run_cli("gradient --particles " + tiny + od, dir / "i.log") == 0);
    CHECK(run_cli("gradient --strict --particles " + tiny + od, dir / "j.log") == 4);
    CHECK(slurp(dir / "j.log").find("strict") != std::string::npos);
}

TEST_CASE("pipeline equals the manual stage sequence") {
    const fs::path dir = case_dir("compose");
    const fs::path cfg = dir / "cfg.json";
    spit(cfg, pipeline_config(31));
    const std::string with_cfg = "--config " + cfg.string();

    const fs::path manual = dir / "manual";
    const std::string m = " --out-dir " + manual.string();
    REQUIRE(run_cli(with_cfg + " synth-stepped" + m, dir / "m1.log") == 0);
    REQUIRE(run_cli(with_cfg + " gradient --particles " +
                        (manual / "stepped_particles.csv").string() + m,
                    dir / "m2.log") == 0);
    REQUIRE(run_cli(with_cfg + " energy" + m, dir / "m3.log") == 0);
    REQUIRE(run_cli(with_cfg + " region-energy" + m, dir / "m4.log") == 0);
    REQUIRE(run_cli(with_cfg + " fit-ctod --faces " + (manual / "stepped_faces.csv").string() +
                        " --tip-from-meta " + (manual / "stepped_meta.json").string() + m,
                    dir / "m5.log") == 0);

    const fs::path piped = dir / "piped";
    REQUIRE(run_cli(with_cfg + " pipeline --out-dir " + piped.string(), dir / "p.log") == 0);

    for (const char* name :
         {"stepped_particles.csv", "stepped_faces.csv", "stepped_meta.json", "gradient.csv",
          "quality_report.json", "energy.csv", "energy.vtk", "stretch.vtk",
          "region_energy.json", "ctod_profile.csv", "ctod_fit.json"}) {
        INFO(name);
        CHECK(slurp(manual / name) == slurp(piped / name));
    }

    // every manifest output is listed with its on-disk hash
    const json mf = manifest_of(piped, "manifest_pipeline.json");
    REQUIRE(mf["stages"].size() == 5);
    for (const json& rec : mf["outputs"]) {
        const std::string path = rec["path"];
        INFO(path);
        CHECK(crackfield::sha256_file_hex(path) == rec["sha256"]);
    }

    // window sensitivity shows up in the fit output and on stdout
    const json fit = json::parse(slurp(piped / "ctod_fit.json"));
    CHECK(fit["window_sensitivity"].size() == 4);
    CHECK(slurp(dir / "m5.log").find("window [") != std::string::npos);

    // the summary agrees with the per-stage files it joins
    const json summary = json::parse(slurp(piped / "pipeline_summary.json"));
    const json region = json::parse(slurp(piped / "region_energy.json"));
    CHECK(summary["e_lig_j"] == region["e_lig_j"]);
    CHECK(summary["gc_j_m2"] == fit["gc_j_m2"]);
}

TEST_CASE("pipeline cache reruns are identical and skip stages") {
    const fs::path dir = case_dir("cache");
    const fs::path cfg = dir / "cfg.json";
    spit(cfg, pipeline_config(32));
    const std::string cmd =
        "--config " + cfg.string() + " pipeline --cache --out-dir " + dir.string();

    REQUIRE(run_cli(cmd, dir / "run1.log") == 0);
    const std::string gradient1 = slurp(dir / "gradient.csv");
    const std::string hash1 = manifest_of(dir, "manifest_pipeline.json")["manifest_hash"];
    CHECK(slurp(dir / "run1.log").find("(cached)") == std::string::npos);

    REQUIRE(run_cli(cmd, dir / "run2.log") == 0);
    CHECK(slurp(dir / "run2.log").find("(cached)") != std::string::npos);
    CHECK(slurp(dir / "gradient.csv") == gradient1);
    CHECK(manifest_of(dir, "manifest_pipeline.json")["manifest_hash"] == hash1);
}

TEST_CASE("thread count changes neither outputs nor the manifest hash") {
    const fs::path dir = case_dir("threads");
    const std::string od = " --out-dir " + dir.string();
    REQUIRE(run_cli("synth-affine --n 4000 --seed 9 --f0 1.05,0.02,0,0,0.97,0,0,0,1.01" + od,
                    dir / "s.log") == 0);
    const std::string particles = (dir / "affine_particles.csv").string();

    REQUIRE(run_cli("gradient --threads 1 --particles " + particles + od, dir / "t1.log") == 0);
    const std::string bytes1 = slurp(dir / "gradient.csv");
    const std::string hash1 = manifest_of(dir, "manifest_gradient.json")["manifest_hash"];

    REQUIRE(run_cli("gradient --threads 8 --particles " + particles + od, dir / "t8.log") == 0);
    CHECK(slurp(dir / "gradient.csv") == bytes1);
    CHECK(manifest_of(dir, "manifest_gradient.json")["manifest_hash"] == hash1);
}

TEST_CASE("regress and report recover an exact line") {
    const fs::path dir = case_dir("regress");
    const std::string od = " --out-dir " + dir.string();
    spit(dir / "points.csv", "e_lig_j,gc_j_m2\n"
                             "0,4.36\n"
                             "5e-08,6.28\n"
                             "1e-07,8.2\n"
                             "1.5e-07,10.12\n"
                             "2e-07,12.04\n");

    REQUIRE(run_cli("regress --points " + (dir / "points.csv").string() + od,
                    dir / "r.log") == 0);
    const json reg = json::parse(slurp(dir / "regression.json"));
    CHECK(reg["slope_per_m2"].get<double>() == doctest::Approx(3.84e7).epsilon(1e-7));
    CHECK(reg["intercept_j_m2"].get<double>() == doctest::Approx(4.36).epsilon(1e-7));
    CHECK(reg["n_points"] == 5);

    REQUIRE(run_cli("report" + od, dir / "rep.log") == 0);
    const std::string report = slurp(dir / "report.txt");
    CHECK(report.find("3.84e+07") != std::string::npos);
    CHECK(report.find("4.36") != std::string::npos);
}

TEST_CASE("phantom suite through pipeline, regress, report") {
    const fs::path dir = case_dir("suite");
    constexpr double mu = 35000.0;

    // three phantoms with increasing ligament amplification, each built so
    // its true G_c sits exactly on G = 3.84e7 * E + 4.36
    std::string points = "e_lig_j,gc_j_m2\n";
    const double amps[] = {1.875, 3.75, 5.625};
    for (const double amp : amps) {
        const double lam = 1.0 + amp * 0.1;
        const double w = 0.5 * mu * (lam * lam + 2.0 / lam - 3.0);
        const double e_true = w * (320e-6 * 100e-6 * 320e-6);   // label box volume
        const double g_true = 3.84e7 * e_true + 4.36;

        json cfg = json::parse(pipeline_config(40));
        cfg["phantom"]["density_per_um3"] = 3e-4;
        cfg["phantom"]["lig_amplification"] = amp;
        cfg["phantom"]["k_far_pa_sqrt_m"] = std::sqrt(g_true * 3.0 * mu);
        const fs::path run = dir / ("amp_" + std::to_string(amp));
        spit(dir / "cfg.json", cfg.dump());
        REQUIRE(run_cli("--config " + (dir / "cfg.json").string() + " pipeline --out-dir " +
                            run.string(),
                        dir / "p.log") == 0);

        const json s = json::parse(slurp(run / "pipeline_summary.json"));
        CHECK(s["e_lig_closed_form_j"].get<double>() ==
              doctest::Approx(e_true).epsilon(1e-9));
        CHECK(s["gc_true_j_m2"].get<double>() == doctest::Approx(g_true).epsilon(1e-9));
        CHECK(s["e_lig_j"].get<double>() == doctest::Approx(e_true).epsilon(0.03));
        CHECK(s["gc_j_m2"].get<double>() == doctest::Approx(g_true).epsilon(0.01));
        points += s["e_lig_j"].dump() + "," + s["gc_j_m2"].dump() + "\n";
    }

    spit(dir / "points.csv", points);
    const std::string od = " --out-dir " + dir.string();
    REQUIRE(run_cli("regress --points " + (dir / "points.csv").string() + od,
                    dir / "r.log") == 0);
    const json reg = json::parse(slurp(dir / "regression.json"));
    CHECK(reg["slope_per_m2"].get<double>() == doctest::Approx(3.84e7).epsilon(0.10));
    CHECK(reg["intercept_j_m2"].get<double>() == doctest::Approx(4.36).epsilon(0.05));
    CHECK(fs::exists(dir / "regression_plot.csv"));
    REQUIRE(run_cli("report" + od, dir / "rep.log") == 0);
    CHECK(slurp(dir / "report.txt").find("m^-2") != std::string::npos);
}

TEST_CASE("render, detect, link, gradient chain through the tool") {
    const fs::path dir = case_dir("imaging-chain");
    const std::string od = " --out-dir " + dir.string();

    // small stack, quiet noise, small-increment deformation: the regime the
    // imaging round trip is specified for
    json cfg;
    cfg["seed"] = 12;
    cfg["imaging"] = {{"nx", 128},        {"ny", 128},
                      {"nz", 40},         {"noise_sigma", 4.0},
                      {"link_max_disp_um", 3.5}, {"link_predictor", true}};
    spit(dir / "cfg.json", cfg.dump(2));
    const std::string with_cfg = "--config " + (dir / "cfg.json").string();

    REQUIRE(run_cli(with_cfg + " synth-affine --n 250 --seed 12"
                              " --f0 1.006,0.004,0,0,0.996,0,0,0,1.003"
                              " --translate-um 0.8,-0.5,0.4"
                              " --lo-um 8,8,10 --hi-um 78,78,70" + od,
                    dir / "a.log") == 0);
    REQUIRE(run_cli(with_cfg + " render --particles " +
                        (dir / "affine_particles.csv").string() + od,
                    dir / "b.log") == 0);
    REQUIRE(run_cli(with_cfg + " detect --volume " +
                        (dir / "scatter_reference.cfvol").string() + " --out blobs_ref.csv" + od,
                    dir / "c.log") == 0);
    REQUIRE(run_cli(with_cfg + " detect --volume " +
                        (dir / "scatter_deformed.cfvol").string() + " --out blobs_def.csv" + od,
                    dir / "d.log") == 0);
    REQUIRE(run_cli(with_cfg + " link --ref " + (dir / "blobs_ref.csv").string() + " --def " +
                        (dir / "blobs_def.csv").string() + od,
                    dir / "e.log") == 0);
    REQUIRE(run_cli(with_cfg + " gradient --particles " +
                        (dir / "linked_particles.csv").string() + od,
                    dir / "f.log") == 0);

    const json stats = json::parse(slurp(dir / "link_stats.json"));
    CHECK(stats["n_tracks"].get<int>() > 200);
    const json quality = json::parse(slurp(dir / "quality_report.json"));
    CHECK(quality["invalid_fraction"].get<double>() < 0.5);
}

TEST_CASE("synth-lefm faces recover the requested energy release rate") {
    const fs::path dir = case_dir("lefm-chain");
    const std::string od = " --out-dir " + dir.string();
    REQUIRE(run_cli("synth-lefm --n 50 --g 10 --seed 5" + od, dir / "a.log") == 0);
    REQUIRE(run_cli("fit-ctod --faces " + (dir / "lefm_faces.csv").string() +
                        " --tip-from-meta " + (dir / "lefm_meta.json").string() + od,
                    dir / "b.log") == 0);
    const json fit = json::parse(slurp(dir / "ctod_fit.json"));
    CHECK(fit["gc_j_m2"].get<double>() == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("environment overrides reach the effective config") {
    const fs::path dir = case_dir("env");
    const fs::path cfg = dir / "cfg.json";
    spit(cfg, R"({"seed": 4})");
    setenv("CRACKFIELD_MATERIAL__MU_PA", "50000", 1);
    const int rc = run_cli("--config " + cfg.string() + " synth-affine --n 100 --out-dir " +
                               dir.string(),
                           dir / "run.log");
    unsetenv("CRACKFIELD_MATERIAL__MU_PA");
    REQUIRE(rc == 0);
    const json mf = manifest_of(dir, "manifest_synth_affine.json");
    CHECK(mf["config"]["material"]["mu_pa"].get<double>() == 50000.0);
    CHECK(mf["seed"] == 4);
}
