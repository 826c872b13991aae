#include <doctest.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crackfield/errors.hpp"
#include "crackfield/hash.hpp"
#include "crackfield/io/config.hpp"
#include "crackfield/io/particle_table.hpp"
#include "crackfield/io/point_cloud.hpp"
#include "crackfield/io/raw_volume.hpp"
#include "crackfield/manifest.hpp"

using namespace crackfield;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    const fs::path dir = fs::temp_directory_path() / "crackfield_io_tests";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    REQUIRE(out.good());
}

bool message_contains(const std::exception& e, const std::string& needle) {
    return std::string(e.what()).find(needle) != std::string::npos;
}

#define CHECK_THROWS_SAYING(expr, Type, needle)                   \
    do {                                                          \
        try {                                                     \
            expr;                                                 \
            FAIL("expected " #Type " from " #expr);               \
        } catch (const Type& e) {                                 \
            CHECK(message_contains(e, needle));                   \
        }                                                         \
    } while (0)

} // namespace

TEST_CASE("particle table round trip with quality and labels") {
    ParticleTable t;
    t.tracks = {
        {0, {1.0 / 3.0, -2.5e-7, 1e9}, {0.1, 0.2, 0.3}, 0.5},
        {7, {4.0, 5.0, 6.0}, {4.25, 5.5, 6.0625}, 1.0},
    };
    t.has_quality = true;
    t.label_names = {"ligament", "score"};
    t.label_columns = {{1.0, 0.0}, {0.125, 0.875}};
    const fs::path p = scratch() / "round.csv";
    write_particle_table(t, p.string());

    const std::string text = slurp(p);
    CHECK(text.rfind("id,Xx,Xy,Xz,xx,xy,xz,quality,ligament,score\n", 0) == 0);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.back() == '\n');

    const ParticleTable r = read_particle_table(p.string());
    REQUIRE(r.tracks.size() == 2);
    CHECK(r.has_quality);
    CHECK(r.label_names == t.label_names);
    CHECK(r.tracks[0].id == 0);
    CHECK(r.tracks[1].id == 7);
    CHECK(r.tracks[0].X.x == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(r.tracks[0].X.y == doctest::Approx(-2.5e-7).epsilon(1e-9));
    CHECK(r.tracks[0].X.z == doctest::Approx(1e9).epsilon(1e-9));
    CHECK(r.tracks[0].quality == 0.5);
    CHECK(r.label_columns[0][0] == 1.0);
    CHECK(r.label_columns[1][1] == 0.875);

    // a rewrite of what was read is byte-identical (stable 9-digit format)
    const fs::path p2 = scratch() / "round2.csv";
    write_particle_table(r, p2.string());
    CHECK(slurp(p2) == text);
}

TEST_CASE("particle table without quality column") {
    ParticleTable t;
    t.tracks = {{3, {1, 2, 3}, {4, 5, 6}, 1.0}};
    const fs::path p = scratch() / "noq.csv";
    write_particle_table(t, p.string());
    CHECK(slurp(p).rfind("id,Xx,Xy,Xz,xx,xy,xz\n", 0) == 0);
    const ParticleTable r = read_particle_table(p.string());
    CHECK(!r.has_quality);
    CHECK(r.tracks[0].quality == 1.0);   // default fills in
}

TEST_CASE("particle table rejects malformed input with located messages") {
    const fs::path p = scratch() / "bad.csv";

    spit(p, "id,Xx,Xy,Xz,xx,xy,wrong\n1,0,0,0,0,0,0\n");
    CHECK_THROWS_SAYING((void)read_particle_table(p.string()), IoError, "header column 7");

    spit(p, "id,Xx,Xy\n");
    CHECK_THROWS_SAYING((void)read_particle_table(p.string()), IoError, "header has 3");

    spit(p, "id,Xx,Xy,Xz,xx,xy,xz\r\n1,0,0,0,0,0,0\n");
    CHECK_THROWS_SAYING((void)read_particle_table(p.string()), IoError, "LF");

    spit(p, "id,Xx,Xy,Xz,xx,xy,xz\n1,0,0,0,0,0\n");
    CHECK_THROWS_SAYING((void)read_particle_table(p.string()), IoError, "expected 7");

    spit(p, "id,Xx,Xy,Xz,xx,xy,xz\n1,0,zero,0,0,0,0\n");
    CHECK_THROWS_SAYING((void)read_particle_table(p.string()), IoError, "not a number: 'zero'");

    spit(p, "id,Xx,Xy,Xz,xx,xy,xz\n1.5,0,0,0,0,0,0\n");
    CHECK_THROWS_SAYING((void)read_particle_table(p.string()), IoError, "integer id");

    spit(p, "id,Xx,Xy,Xz,xx,xy,xz\n1,0,0,0,0,0,0\n\n2,0,0,0,0,0,0\n");
    CHECK_THROWS_SAYING((void)read_particle_table(p.string()), IoError, ":3: empty line");

    spit(p, "");
    CHECK_THROWS_AS((void)read_particle_table(p.string()), IoError);
    CHECK_THROWS_AS((void)read_particle_table((scratch() / "absent.csv").string()), IoError);
}

TEST_CASE("numeric table round trip and errors") {
    NumericTable t;
    t.columns = {"r_um", "delta_um"};
    t.rows = {{100.0, 0.015625}, {200.0, 0.03125}, {300.5, 0.0625}};
    const fs::path p = scratch() / "num.csv";
    write_numeric_table(t, p.string());
    CHECK(slurp(p).rfind("r_um,delta_um\n100,0.015625\n", 0) == 0);
    const NumericTable r = read_numeric_table(p.string());
    CHECK(r.columns == t.columns);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[2][0] == 300.5);

    spit(p, "a,b\n1\n");
    CHECK_THROWS_SAYING((void)read_numeric_table(p.string()), IoError, "expected 2");
    NumericTable empty_cols;
    CHECK_THROWS_AS(write_numeric_table(empty_cols, p.string()), InvalidInputError);
}

TEST_CASE("raw volume round trips bitwise") {
    VoxelVolume v;
    v.nx = 3;
    v.ny = 2;
    v.nz = 2;
    v.dx_um = 0.68;
    v.dy_um = 0.68;
    v.dz_um = 2.0;
    v.channel = Channel::Fluorescence;
    v.data = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 65535};
    const fs::path p = scratch() / "vol.cfv";
    write_raw_volume(v, p.string());
    CHECK(fs::file_size(p) == 64 + 2 * 12);

    const VoxelVolume r = read_raw_volume(p.string());
    CHECK(r.nx == 3);
    CHECK(r.ny == 2);
    CHECK(r.nz == 2);
    CHECK(r.dx_um == v.dx_um);
    CHECK(r.dz_um == v.dz_um);
    CHECK(r.channel == Channel::Fluorescence);
    CHECK(r.data == v.data);

    const fs::path p2 = scratch() / "vol2.cfv";
    write_raw_volume(r, p2.string());
    CHECK(sha256_file_hex(p.string()) == sha256_file_hex(p2.string()));
}

TEST_CASE("raw volume reader rejects damaged files") {
    VoxelVolume v;
    v.nx = 2;
    v.ny = 2;
    v.nz = 1;
    v.data = {10, 20, 30, 40};
    const fs::path p = scratch() / "dmg.cfv";
    write_raw_volume(v, p.string());
    const std::string good = slurp(p);

    std::string bad = good;
    bad[0] = 'X';
    spit(p, bad);
    CHECK_THROWS_SAYING((void)read_raw_volume(p.string()), IoError, "bad magic");

    spit(p, good.substr(0, 40));
    CHECK_THROWS_SAYING((void)read_raw_volume(p.string()), IoError, "truncated header (40");

    spit(p, good.substr(0, good.size() - 2));
    CHECK_THROWS_SAYING((void)read_raw_volume(p.string()), IoError, "truncated payload");

    spit(p, good + "!");
    CHECK_THROWS_SAYING((void)read_raw_volume(p.string()), IoError, "trailing bytes");

    bad = good;
    bad[50] = '\x01';
    spit(p, bad);
    CHECK_THROWS_SAYING((void)read_raw_volume(p.string()), IoError, "reserved header byte at offset 50");

    bad = good;
    bad[42] = '\x07';   // channel tag
    spit(p, bad);
    CHECK_THROWS_SAYING((void)read_raw_volume(p.string()), IoError, "unknown channel tag 7");

    bad = good;
    bad[6] = bad[7] = bad[8] = bad[9] = '\0';   // nx = 0
    spit(p, bad);
    CHECK_THROWS_SAYING((void)read_raw_volume(p.string()), IoError, "zero dimension");

    VoxelVolume torn = v;
    torn.data.pop_back();
    CHECK_THROWS_AS(write_raw_volume(torn, p.string()), InvalidInputError);
}

TEST_CASE("config parses empty object to defaults and round trips") {
    const PipelineConfig c = parse_config("{}", "test");
    CHECK(c.material.mu_pa == 35000.0);
    CHECK(c.estimator.k_neighbors == 20);
    CHECK(c.seed == 0);
    CHECK(c.strict_invalid_fraction == 0.05);

    const std::string canon = c.canonical_json();
    const PipelineConfig c2 = parse_config(canon, "canon");
    CHECK(c2.canonical_json() == canon);

    // canonical form is strict JSON and mentions every section
    const nlohmann::json doc = nlohmann::json::parse(canon);
    for (const char* key : {"material", "estimator", "region", "volume_weights", "ctod",
                            "imaging", "phantom", "seed", "threads", "paths"}) {
        CHECK(doc.contains(key));
    }
}

TEST_CASE("config rejects unknown keys with the full path") {
    CHECK_THROWS_SAYING((void)parse_config(R"({"material": {"mu": 1}})", "cfg.json"),
                        ConfigError, "unknown config key: cfg.json.material.mu");
    CHECK_THROWS_SAYING((void)parse_config(R"({"bogus": 1})", "cfg.json"), ConfigError,
                        "unknown config key: cfg.json.bogus");
    CHECK_THROWS_SAYING((void)parse_config(R"({"estimator": {"k_neighbors": "many"}})", "c"),
                        ConfigError, "c.estimator.k_neighbors: expected an integer");
    CHECK_THROWS_SAYING((void)parse_config("[1,2]", "c"), ConfigError, "expected an object");
    CHECK_THROWS_SAYING((void)parse_config("{not json", "c"), ConfigError, "not valid JSON");
    CHECK_THROWS_SAYING((void)parse_config(R"({"material": {"mu_pa": -5}})", "c"), ConfigError,
                        "mu");
}

TEST_CASE("region specs survive the config round trip") {
    const std::string text = R"({
      "region": {
        "kind": "intersection",
        "parts": [
          {"kind": "box", "box": {"lo_um": [0,0,0], "hi_um": [100,50,60]}},
          {"kind": "field_threshold", "threshold": {"quantile": 0.9}},
          {"kind": "ligament", "ligament": {"x_back_um": 10, "x_front_um": 90,
           "z_lo_um": 5, "z_hi_um": 55, "y_center_um": 0, "y_half_width_um": 20}}
        ]
      }
    })";
    const PipelineConfig c = parse_config(text, "r");
    CHECK(c.region.kind == RegionSpec::Kind::Intersection);
    REQUIRE(c.region.parts.size() == 3);
    CHECK(c.region.parts[0].kind == RegionSpec::Kind::Box);
    CHECK(c.region.parts[1].kind == RegionSpec::Kind::FieldThreshold);
    CHECK(c.region.parts[2].kind == RegionSpec::Kind::LigamentGeometric);
    CHECK(c.region.parts[2].ligament.x_front_um == 90.0);

    const PipelineConfig c2 = parse_config(c.canonical_json(), "r2");
    CHECK(c2.canonical_json() == c.canonical_json());

    CHECK_THROWS_SAYING(
        (void)parse_config(R"({"region": {"kind": "blob"}})", "r"), ConfigError,
        "unknown region kind 'blob'");
    CHECK_THROWS_SAYING(
        (void)parse_config(R"({"region": {"kind": "intersection", "parts": [{"kind": "box",
          "box": {"lo_um": [0,0], "hi_um": [1,1,1]}}]}})", "r"),
        ConfigError, "parts[0].box.lo_um");
}

TEST_CASE("environment overrides rewrite config values") {
    const fs::path p = scratch() / "env.json";
    spit(p, R"({"material": {"mu_pa": 1000}, "seed": 3})");

    const PipelineConfig plain = load_config(p.string(), false);
    CHECK(plain.material.mu_pa == 1000.0);
    CHECK(plain.seed == 3);

    setenv("CRACKFIELD_MATERIAL__MU_PA", "42000", 1);
    setenv("CRACKFIELD_SEED", "99", 1);
    setenv("CRACKFIELD_PATHS__OUT_DIR", "runs/out", 1);
    const PipelineConfig c = load_config(p.string());
    CHECK(c.material.mu_pa == 42000.0);
    CHECK(c.seed == 99);
    CHECK(c.paths.out_dir == "runs/out");

    setenv("CRACKFIELD_MATERIAL__BOGUS", "1", 1);
    CHECK_THROWS_SAYING((void)load_config(p.string()), ConfigError, "CRACKFIELD_MATERIAL__BOGUS");
    unsetenv("CRACKFIELD_MATERIAL__BOGUS");

    setenv("CRACKFIELD_NOWHERE__KEY", "1", 1);
    CHECK_THROWS_SAYING((void)load_config(p.string()), ConfigError,
                        "unknown config section 'nowhere'");
    unsetenv("CRACKFIELD_NOWHERE__KEY");

    // bad value lands in the strict parse with the key's own path
    setenv("CRACKFIELD_ESTIMATOR__K_NEIGHBORS", "\"many\"", 1);
    CHECK_THROWS_SAYING((void)load_config(p.string()), ConfigError,
                        "k_neighbors: expected an integer");
    unsetenv("CRACKFIELD_ESTIMATOR__K_NEIGHBORS");

    unsetenv("CRACKFIELD_MATERIAL__MU_PA");
    unsetenv("CRACKFIELD_SEED");
    unsetenv("CRACKFIELD_PATHS__OUT_DIR");
}

TEST_CASE("write_config emits a loadable file") {
    PipelineConfig c;
    c.material.mu_pa = 12345.0;
    c.seed = 17;
    const fs::path p = scratch() / "written.json";
    write_config(c, p.string());
    const PipelineConfig r = load_config(p.string(), false);
    CHECK(r.material.mu_pa == 12345.0);
    CHECK(r.seed == 17);
    CHECK(r.canonical_json() == c.canonical_json());
}

TEST_CASE("point cloud export writes legacy vtk polydata") {
    ScalarField f;
    f.unit = FieldUnit::JoulePerCubicMeter;
    f.samples = {
        {0, {0, 0, 0}, {1.5, 2.5, 3.5}, 100.0, true},
        {1, {0, 0, 0}, {4.0, 5.0, 6.0}, 250.0, false},   // dropped
        {2, {0, 0, 0}, {7.0, 8.0, 9.0}, 0.0625, true},
    };
    VectorField d;
    d.samples = {
        {0, {0, 0, 0}, {0, 0, 0}, {0.0, 1.0, 0.0}, true},
        {1, {0, 0, 0}, {0, 0, 0}, {1.0, 0.0, 0.0}, true},
        {2, {0, 0, 0}, {0, 0, 0}, {0.0, 0.0, -1.0}, true},
    };
    const fs::path p = scratch() / "cloud.vtk";
    export_point_cloud(f, "energy_density", p.string(), &d, "stretch_dir");
    const std::string text = slurp(p);
    CHECK(text.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
    CHECK(text.find("crackfield energy_density (J/m^3)\n") != std::string::npos);
    CHECK(text.find("DATASET POLYDATA\n") != std::string::npos);
    CHECK(text.find("POINTS 2 double\n1.5 2.5 3.5\n7 8 9\n") != std::string::npos);
    CHECK(text.find("VERTICES 2 4\n1 0\n1 1\n") != std::string::npos);
    CHECK(text.find("SCALARS energy_density double 1\nLOOKUP_TABLE default\n100\n0.0625\n") !=
          std::string::npos);
    CHECK(text.find("VECTORS stretch_dir double\n0 1 0\n0 0 -1\n") != std::string::npos);

    CHECK_THROWS_AS(export_point_cloud(f, "has space", p.string()), InvalidInputError);
    VectorField wrong = d;
    wrong.samples[2].particle_id = 9;
    CHECK_THROWS_SAYING(export_point_cloud(f, "w", p.string(), &wrong), InvalidInputError,
                        "id mismatch at index 2");
    wrong.samples.pop_back();
    CHECK_THROWS_AS(export_point_cloud(f, "w", p.string(), &wrong), InvalidInputError);
}

TEST_CASE("sha256 matches published vectors") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string million(1000000, 'a');
    CHECK(sha256_hex(million) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");

    // incremental updates across block boundaries agree with one-shot
    Sha256 h;
    h.update(million.substr(0, 13));
    h.update(million.substr(13, 700001));
    h.update(million.substr(700014));
    CHECK(h.hex_digest() == sha256_hex(million));
    // digest resets the state
    h.update("abc");
    CHECK(h.hex_digest() == sha256_hex("abc"));

    const fs::path p = scratch() / "hashme.bin";
    spit(p, "abc");
    CHECK(sha256_file_hex(p.string()) == sha256_hex("abc"));
    CHECK_THROWS_AS((void)sha256_file_hex((scratch() / "nope.bin").string()), IoError);
}

TEST_CASE("manifest hash ignores timing but tracks inputs") {
    RunManifest m;
    m.version = "1.0.0";
    m.subcommand = "gradient";
    m.args = {"--config", "c.json"};
    m.config_json = R"({"seed": 5})";
    m.inputs = {{"in.csv", sha256_hex("x")}};
    m.outputs = {{"out.csv", sha256_hex("y")}};
    m.seed = 5;
    m.threads = 4;
    m.started_utc = "2026-01-01T00:00:00Z";
    m.wall_seconds = 12.5;

    RunManifest later = m;
    later.started_utc = "2026-06-30T23:59:59Z";
    later.wall_seconds = 99.0;
    CHECK(m.manifest_hash() == later.manifest_hash());

    // thread width and raw argv are provenance, not result: same hash
    RunManifest wide = m;
    wide.threads = 16;
    wide.args = {"--config", "c.json", "--threads", "16"};
    wide.config_json = R"({"seed": 5, "threads": 16})";
    RunManifest narrow = m;
    narrow.config_json = R"({"seed": 5, "threads": 0})";
    CHECK(wide.manifest_hash() == narrow.manifest_hash());

    RunManifest other = m;
    other.seed = 6;
    CHECK(m.manifest_hash() != other.manifest_hash());

    const nlohmann::json doc = nlohmann::json::parse(m.to_json());
    CHECK(doc["manifest_hash"] == m.manifest_hash());
    CHECK(doc["started_utc"] == "2026-01-01T00:00:00Z");
    CHECK(doc["subcommand"] == "gradient");
    CHECK(doc["inputs"][0]["path"] == "in.csv");

    const fs::path p = scratch() / "manifest.json";
    write_manifest(m, p.string());
    const std::string text = slurp(p);
    CHECK(text.back() == '\n');
    CHECK(nlohmann::json::parse(text)["manifest_hash"] == m.manifest_hash());
}
