#include "stages.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>

#include <json.hpp>

#include "crackfield/constitutive.hpp"
#include "crackfield/errors.hpp"
#include "crackfield/fracture.hpp"
#include "crackfield/hash.hpp"
#include "crackfield/imaging.hpp"
#include "crackfield/io/particle_table.hpp"
#include "crackfield/io/point_cloud.hpp"
#include "crackfield/io/raw_volume.hpp"
#include "crackfield/kinematics.hpp"
#include "crackfield/regions.hpp"
#include "crackfield/rng.hpp"
#include "crackfield/synth.hpp"

namespace crackfield::cli {

namespace {

using nlohmann::json;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw IoError("not valid JSON: " + path);
    return j;
}

Vec3 vec3_of(const std::vector<double>& v, const char* what) {
    if (v.size() != 3) throw ConfigError(std::string(what) + " needs exactly 3 values");
    return {v[0], v[1], v[2]};
}

std::size_t column_of(const NumericTable& t, const std::string& path, const std::string& name) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (t.columns[i] == name) return i;
    }
    throw IoError(path + ": missing column '" + name + "'");
}

std::vector<FacePoint> load_faces(const std::string& path) {
    const NumericTable t = read_numeric_table(path);
    const std::size_t cx = column_of(t, path, "x_um");
    const std::size_t cy = column_of(t, path, "y_um");
    const std::size_t cz = column_of(t, path, "z_um");
    const std::size_t cu = column_of(t, path, "upper");
    std::vector<FacePoint> faces;
    faces.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        faces.push_back(FacePoint{{r[cx], r[cy], r[cz]}, r[cu] != 0.0});
    }
    return faces;
}

void write_faces(const std::vector<FacePoint>& faces, const std::string& path) {
    NumericTable t;
    t.columns = {"x_um", "y_um", "z_um", "upper"};
    t.rows.reserve(faces.size());
    for (const FacePoint& f : faces) {
        t.rows.push_back({f.p_um.x, f.p_um.y, f.p_um.z, f.upper ? 1.0 : 0.0});
    }
    write_numeric_table(t, path);
}

constexpr const char* kGradientColumns[] = {
    "id", "Xx_um", "Xy_um", "Xz_um", "xx_um", "xy_um", "xz_um",
    "f00", "f01", "f02", "f10", "f11", "f12", "f20", "f21", "f22",
    "jacobian", "lambda1", "lambda2", "lambda3", "dir1x", "dir1y", "dir1z",
    "residual_rms_um", "condition", "n_neighbors", "flag",
};

// gradient rows carry everything downstream stages need, so `energy` and
// `region-energy` rebuild their inputs from one file
struct GradientRows {
    ParticleSet set;
    std::vector<DefGradSample> samples;
};

GradientRows load_gradient(const std::string& path) {
    const NumericTable t = read_numeric_table(path);
    std::size_t col[std::size(kGradientColumns)];
    for (std::size_t i = 0; i < std::size(kGradientColumns); ++i) {
        col[i] = column_of(t, path, kGradientColumns[i]);
    }
    std::vector<ParticleTrack> tracks;
    std::vector<DefGradSample> samples;
    tracks.reserve(t.rows.size());
    samples.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        ParticleTrack tr;
        tr.id = static_cast<std::int64_t>(r[col[0]]);
        tr.X = {r[col[1]], r[col[2]], r[col[3]]};
        tr.x = {r[col[4]], r[col[5]], r[col[6]]};
        tracks.push_back(tr);

        DefGradSample s;
        s.particle_id = tr.id;
        for (int e = 0; e < 9; ++e) s.F.a[e] = r[col[7 + static_cast<std::size_t>(e)]];
        s.J = r[col[16]];
        s.residual_rms_um = r[col[23]];
        s.condition = r[col[24]];
        s.n_neighbors = static_cast<int>(r[col[25]]);
        s.flag = static_cast<SampleFlag>(static_cast<int>(r[col[26]]));
        if (s.valid()) {
            s.polar = polar_decompose(s.F);
            const EigenSym3 ev = eig_sym3(s.polar.V);
            for (int e = 0; e < 3; ++e) {
                s.principal_stretches[e] = ev.values[e];
                s.principal_dirs[e] = ev.vectors[e];
            }
        }
        samples.push_back(s);
    }
    return {build_particle_set(std::move(tracks)), std::move(samples)};
}

struct EnergyRows {
    ParticleSet set;
    ScalarField w;
};

EnergyRows load_energy(const std::string& path) {
    const NumericTable t = read_numeric_table(path);
    const std::size_t ci = column_of(t, path, "id");
    const std::size_t cX[3] = {column_of(t, path, "Xx_um"), column_of(t, path, "Xy_um"),
                               column_of(t, path, "Xz_um")};
    const std::size_t cx[3] = {column_of(t, path, "xx_um"), column_of(t, path, "xy_um"),
                               column_of(t, path, "xz_um")};
    const std::size_t cw = column_of(t, path, "w_j_m3");
    const std::size_t cv = column_of(t, path, "valid");
    std::vector<ParticleTrack> tracks;
    ScalarField w;
    w.unit = FieldUnit::JoulePerCubicMeter;
    for (const auto& r : t.rows) {
        ScalarSample s;
        s.particle_id = static_cast<std::int64_t>(r[ci]);
        s.X = {r[cX[0]], r[cX[1]], r[cX[2]]};
        s.x = {r[cx[0]], r[cx[1]], r[cx[2]]};
        s.value = r[cw];
        s.valid = r[cv] != 0.0;
        w.samples.push_back(s);
        tracks.push_back(ParticleTrack{s.particle_id, s.X, s.x, 1.0});
    }
    return {build_particle_set(std::move(tracks)), std::move(w)};
}

json fit_to_json(const FractureFit& fit) {
    return json{{"c_sqrt_m", fit.c_sqrt_m},
                {"r_tip_offset_um", fit.r_tip_offset_um},
                {"k1_pa_sqrt_m", fit.k1_pa_sqrt_m},
                {"gc_j_m2", fit.gc_j_m2},
                {"e_eff_pa", fit.e_eff_pa},
                {"fit_rms_um", fit.fit_rms_um},
                {"r_min_um", fit.r_min_um},
                {"r_max_um", fit.r_max_um},
                {"n_samples_used", fit.n_samples_used}};
}

} // namespace

std::string RunContext::out_path(const std::string& name) const {
    return (std::filesystem::path(out_dir) / name).string();
}

void RunContext::record_input(const std::string& path) {
    manifest.inputs.push_back(FileRecord{path, sha256_file_hex(path)});
}

void RunContext::record_output(const std::string& path) {
    manifest.outputs.push_back(FileRecord{path, sha256_file_hex(path)});
}

std::vector<std::string> stage_synth_affine(RunContext& ctx, const AffineArgs& args) {
    Mat3 f0;
    if (args.f0.size() != 9) throw ConfigError("--f0 needs exactly 9 values (row-major)");
    for (int e = 0; e < 9; ++e) f0.a[e] = args.f0[static_cast<std::size_t>(e)];
    const Aabb bounds{vec3_of(args.lo_um, "--lo-um"), vec3_of(args.hi_um, "--hi-um")};
    const Vec3 c = vec3_of(args.translate_um, "--translate-um");

    const ParticleSet set = gen_affine(args.n, bounds, f0, c, ctx.seed);

    ParticleTable table;
    table.tracks = set.tracks();
    table.has_quality = true;
    const std::string out = ctx.out_path("affine_particles.csv");
    write_particle_table(table, out);
    ctx.record_output(out);
    std::printf("synth-affine: %zu particles -> %s\n", set.size(), out.c_str());
    return {out};
}

std::vector<std::string> stage_synth_lefm(RunContext& ctx, const LefmArgs& args) {
    LefmFieldSpec spec;
    spec.mu_pa = ctx.cfg.material.mu_pa;
    spec.tip_um = vec3_of(args.tip_um, "--tip-um");
    spec.k1_pa_sqrt_m = args.k1_pa_sqrt_m > 0.0
                            ? args.k1_pa_sqrt_m
                            : std::sqrt(args.g_j_m2 * spec.e_eff_pa());
    const Aabb bounds{vec3_of(args.lo_um, "--lo-um"), vec3_of(args.hi_um, "--hi-um")};

    const LefmField field =
        gen_lefm_mode1(args.n, bounds, spec, ctx.seed, args.n_face, args.face_r_max_um);

    ParticleTable table;
    table.tracks = field.set.tracks();
    table.has_quality = true;
    const std::string particles = ctx.out_path("lefm_particles.csv");
    const std::string faces = ctx.out_path("lefm_faces.csv");
    const std::string meta = ctx.out_path("lefm_meta.json");
    write_particle_table(table, particles);
    write_faces(field.face_points, faces);
    write_json(meta, json{{"k1_pa_sqrt_m", spec.k1_pa_sqrt_m},
                          {"g_j_m2", spec.g_j_m2()},
                          {"e_eff_pa", spec.e_eff_pa()},
                          {"mu_pa", spec.mu_pa},
                          {"tip_um", {spec.tip_um.x, spec.tip_um.y, spec.tip_um.z}},
                          {"r_excl_um", spec.r_excl_um},
                          {"n_face_points", field.face_points.size()}});
    for (const std::string& p : {particles, faces, meta}) ctx.record_output(p);
    std::printf("synth-lefm: %zu particles, G = %.6g J/m^2, K1 = %.6g Pa sqrt(m) -> %s\n",
                field.set.size(), spec.g_j_m2(), spec.k1_pa_sqrt_m, particles.c_str());
    return {particles, faces, meta};
}

std::vector<std::string> stage_synth_stepped(RunContext& ctx) {
    const SteppedCrackPhantom& ph = ctx.cfg.phantom;
    ph.validate();
    const SteppedCrackField field = gen_stepped_crack(ph, ctx.seed);

    ParticleTable table;
    table.tracks = field.set.tracks();
    table.has_quality = true;
    table.label_names = {"ligament"};
    table.label_columns.resize(1);
    table.label_columns[0].reserve(field.labels.size());
    std::size_t n_lig = 0;
    for (const std::uint8_t l : field.labels) {
        table.label_columns[0].push_back(static_cast<double>(l));
        n_lig += l;
    }

    const std::string particles = ctx.out_path("stepped_particles.csv");
    const std::string faces = ctx.out_path("stepped_faces.csv");
    const std::string meta = ctx.out_path("stepped_meta.json");
    write_particle_table(table, particles);
    write_faces(field.face_points, faces);
    const Aabb label_box = ph.label_box_um();
    write_json(meta,
               json{{"tip_um", {field.tip_um.x, field.tip_um.y, field.tip_um.z}},
                    {"lambda_ligament", ph.lambda_ligament()},
                    {"e_lig_closed_form_j", ph.closed_form_e_lig_j()},
                    {"gc_true_j_m2", ph.gc_true_j_m2()},
                    {"label_box_lo_um", {label_box.lo.x, label_box.lo.y, label_box.lo.z}},
                    {"label_box_hi_um", {label_box.hi.x, label_box.hi.y, label_box.hi.z}},
                    {"n_particles", field.set.size()},
                    {"n_ligament", n_lig}});
    for (const std::string& p : {particles, faces, meta}) ctx.record_output(p);
    std::printf("synth-stepped: %zu particles (%zu ligament), lambda_lig = %.6g -> %s\n",
                field.set.size(), n_lig, ph.lambda_ligament(), particles.c_str());
    return {particles, faces, meta};
}

std::vector<std::string> stage_render(RunContext& ctx, const std::string& particles_path,
                                      bool fluorescence) {
    ctx.record_input(particles_path);
    const ParticleTable table = read_particle_table(particles_path);
    const ParticleSet set = build_particle_set(std::vector<ParticleTrack>(table.tracks));

    const RenderedStack ref =
        render_stack(set, Frame::Reference, ctx.cfg.imaging, nullptr, Rng::mix(ctx.seed, 1),
                     ctx.threads);
    const RenderedStack def =
        render_stack(set, Frame::Deformed, ctx.cfg.imaging, nullptr, Rng::mix(ctx.seed, 2),
                     ctx.threads);

    std::vector<std::string> outs;
    const std::string ref_path = ctx.out_path("scatter_reference.cfvol");
    const std::string def_path = ctx.out_path("scatter_deformed.cfvol");
    write_raw_volume(ref.scatter, ref_path);
    write_raw_volume(def.scatter, def_path);
    outs = {ref_path, def_path};
    if (fluorescence) {
        const std::string fref = ctx.out_path("fluorescence_reference.cfvol");
        const std::string fdef = ctx.out_path("fluorescence_deformed.cfvol");
        write_raw_volume(ref.fluorescence, fref);
        write_raw_volume(def.fluorescence, fdef);
        outs.push_back(fref);
        outs.push_back(fdef);
    }
    const std::string stats = ctx.out_path("render_stats.json");
    write_json(stats, json{{"n_clipped_reference", ref.n_clipped},
                           {"n_clipped_deformed", def.n_clipped},
                           {"n_particles", set.size()}});
    outs.push_back(stats);
    for (const std::string& p : outs) ctx.record_output(p);
    std::printf("render: %zu particles, clipped %zu/%zu -> %s, %s\n", set.size(), ref.n_clipped,
                def.n_clipped, ref_path.c_str(), def_path.c_str());
    return outs;
}

std::vector<std::string> stage_detect(RunContext& ctx, const std::string& volume_path,
                                      const std::string& out_name) {
    ctx.record_input(volume_path);
    const VoxelVolume vol = read_raw_volume(volume_path);
    const std::vector<DetectedBlob> blobs = detect(vol, ctx.cfg.imaging, ctx.threads);

    NumericTable t;
    t.columns = {"x_um", "y_um", "z_um", "peak_intensity", "diameter_um", "quality", "response"};
    t.rows.reserve(blobs.size());
    for (const DetectedBlob& b : blobs) {
        t.rows.push_back({b.centroid_um.x, b.centroid_um.y, b.centroid_um.z, b.peak_intensity,
                          b.diameter_um, b.quality, b.response});
    }
    const std::string out = ctx.out_path(out_name);
    write_numeric_table(t, out);
    ctx.record_output(out);
    std::printf("detect: %zu blobs in %ux%ux%u -> %s\n", blobs.size(), vol.nx, vol.ny, vol.nz,
                out.c_str());
    return {out};
}

namespace {

std::vector<DetectedBlob> load_blobs(const std::string& path) {
    const NumericTable t = read_numeric_table(path);
    const std::size_t cx = column_of(t, path, "x_um");
    const std::size_t cy = column_of(t, path, "y_um");
    const std::size_t cz = column_of(t, path, "z_um");
    const std::size_t cp = column_of(t, path, "peak_intensity");
    const std::size_t cd = column_of(t, path, "diameter_um");
    const std::size_t cq = column_of(t, path, "quality");
    const std::size_t cr = column_of(t, path, "response");
    std::vector<DetectedBlob> blobs;
    blobs.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        blobs.push_back(DetectedBlob{{r[cx], r[cy], r[cz]}, r[cp], r[cd], r[cq], r[cr]});
    }
    return blobs;
}

} // namespace

std::vector<std::string> stage_link(RunContext& ctx, const std::string& ref_blobs_path,
                                    const std::string& def_blobs_path) {
    ctx.record_input(ref_blobs_path);
    ctx.record_input(def_blobs_path);
    const std::vector<DetectedBlob> ref = load_blobs(ref_blobs_path);
    const std::vector<DetectedBlob> def = load_blobs(def_blobs_path);
    const LinkResult linked = link(ref, def, ctx.cfg.imaging, ctx.threads);

    ParticleTable table;
    table.tracks = linked.tracks;
    table.has_quality = true;
    const std::string particles = ctx.out_path("linked_particles.csv");
    const std::string stats = ctx.out_path("link_stats.json");
    write_particle_table(table, particles);
    write_json(stats, json{{"n_tracks", linked.tracks.size()},
                           {"n_ref_unmatched", linked.n_ref_unmatched},
                           {"n_def_unmatched", linked.n_def_unmatched}});
    ctx.record_output(particles);
    ctx.record_output(stats);
    std::printf("link: %zu tracks (%zu ref / %zu def unmatched) -> %s\n", linked.tracks.size(),
                linked.n_ref_unmatched, linked.n_def_unmatched, particles.c_str());
    return {particles, stats};
}

std::vector<std::string> stage_gradient(RunContext& ctx, const std::string& particles_path) {
    ctx.record_input(particles_path);
    const ParticleTable table = read_particle_table(particles_path);
    const ParticleSet set = build_particle_set(std::vector<ParticleTrack>(table.tracks));
    const std::vector<DefGradSample> samples =
        estimate_def_grad(set, ctx.cfg.estimator, ctx.threads);
    const FieldQualityReport report = field_quality_report(samples);

    NumericTable t;
    t.columns.assign(std::begin(kGradientColumns), std::end(kGradientColumns));
    t.rows.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const DefGradSample& s = samples[i];
        const ParticleTrack& tr = set.track(i);
        std::vector<double> row = {static_cast<double>(s.particle_id),
                                   tr.X.x, tr.X.y, tr.X.z, tr.x.x, tr.x.y, tr.x.z};
        for (int e = 0; e < 9; ++e) row.push_back(s.F.a[e]);
        row.push_back(s.J);
        for (int e = 0; e < 3; ++e) row.push_back(s.principal_stretches[e]);
        row.push_back(s.principal_dirs[0].x);
        row.push_back(s.principal_dirs[0].y);
        row.push_back(s.principal_dirs[0].z);
        row.push_back(s.residual_rms_um);
        row.push_back(s.condition);
        row.push_back(static_cast<double>(s.n_neighbors));
        row.push_back(static_cast<double>(static_cast<int>(s.flag)));
        t.rows.push_back(std::move(row));
    }
    const std::string gradient = ctx.out_path("gradient.csv");
    const std::string quality = ctx.out_path("quality_report.json");
    write_numeric_table(t, gradient);
    write_json(quality, json{{"n_total", report.n_total},
                             {"n_valid", report.n_valid},
                             {"n_too_few_neighbors", report.n_too_few_neighbors},
                             {"n_ill_conditioned", report.n_ill_conditioned},
                             {"n_non_positive_j", report.n_non_positive_j},
                             {"invalid_fraction", report.invalid_fraction()},
                             {"residual_rms_p50_um", report.residual_rms_p50_um},
                             {"residual_rms_p90_um", report.residual_rms_p90_um},
                             {"residual_rms_p99_um", report.residual_rms_p99_um},
                             {"residual_rms_max_um", report.residual_rms_max_um},
                             {"j_mean", report.j_mean},
                             {"j_stddev", report.j_stddev},
                             {"j_min", report.j_min},
                             {"j_max", report.j_max}});
    ctx.record_output(gradient);
    ctx.record_output(quality);
    std::printf("gradient: %zu/%zu valid, invalid fraction %.4g, residual p99 %.4g um -> %s\n",
                report.n_valid, report.n_total, report.invalid_fraction(),
                report.residual_rms_p99_um, gradient.c_str());

    if (ctx.strict && report.invalid_fraction() > ctx.cfg.strict_invalid_fraction) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "invalid sample fraction %.6g exceeds strict limit %.6g",
                      report.invalid_fraction(), ctx.cfg.strict_invalid_fraction);
        throw FitError(msg);
    }
    return {gradient, quality};
}

std::vector<std::string> stage_energy(RunContext& ctx, const std::string& gradient_path) {
    ctx.record_input(gradient_path);
    const GradientRows g = load_gradient(gradient_path);
    const ScalarField w = strain_energy_density(g.samples, g.set, ctx.cfg.material);
    const StretchField stretch = max_principal_stretch_field(g.samples, g.set);

    NumericTable t;
    t.columns = {"id", "Xx_um", "Xy_um", "Xz_um", "xx_um", "xy_um", "xz_um", "w_j_m3", "valid"};
    t.rows.reserve(w.samples.size());
    for (const ScalarSample& s : w.samples) {
        t.rows.push_back({static_cast<double>(s.particle_id), s.X.x, s.X.y, s.X.z, s.x.x, s.x.y,
                          s.x.z, s.value, s.valid ? 1.0 : 0.0});
    }
    const std::string energy = ctx.out_path("energy.csv");
    const std::string energy_vtk = ctx.out_path("energy.vtk");
    const std::string stretch_vtk = ctx.out_path("stretch.vtk");
    write_numeric_table(t, energy);
    export_point_cloud(w, "energy_density", energy_vtk);
    export_point_cloud(stretch.value, "max_principal_stretch", stretch_vtk, &stretch.direction);
    for (const std::string& p : {energy, energy_vtk, stretch_vtk}) ctx.record_output(p);

    std::size_t n_valid = 0;
    double w_max = 0.0;
    for (const ScalarSample& s : w.samples) {
        if (!s.valid) continue;
        ++n_valid;
        w_max = std::max(w_max, s.value);
    }
    std::printf("energy: %zu/%zu valid, max W %.6g J/m^3 -> %s\n", n_valid, w.samples.size(),
                w_max, energy.c_str());
    return {energy, energy_vtk, stretch_vtk};
}

std::vector<std::string> stage_region_energy(RunContext& ctx, const std::string& energy_path) {
    ctx.record_input(energy_path);
    const EnergyRows e = load_energy(energy_path);
    const std::vector<std::int64_t> ids = select_region(e.set, ctx.cfg.region, &e.w);
    const RadialWeights weights =
        radial_weights(e.set, ctx.cfg.volume_weights.k_vol,
                       ctx.cfg.volume_weights.calibration_box_um, ctx.threads);
    const RegionEnergy energy = integrate_region_energy(e.w, ids, weights);

    const std::string out = ctx.out_path("region_energy.json");
    write_json(out, json{{"e_lig_j", energy.e_joule},
                         {"n_particles", energy.n_particles},
                         {"volume_estimate_m3", energy.volume_estimate_m3},
                         {"coverage", energy.coverage},
                         {"c_cal", weights.c_cal},
                         {"weight_method", weights.method}});
    ctx.record_output(out);
    std::printf("region-energy: E = %.6g J over %zu particles (coverage %.4g) -> %s\n",
                energy.e_joule, energy.n_particles, energy.coverage, out.c_str());
    return {out};
}

std::vector<std::string> stage_fit_ctod(RunContext& ctx, const std::string& faces_path,
                                        const std::string& tip_meta_path) {
    ctx.record_input(faces_path);
    Vec3 tip = ctx.cfg.ctod.tip_um;
    if (!tip_meta_path.empty()) {
        ctx.record_input(tip_meta_path);
        const json meta = read_json(tip_meta_path);
        if (!meta.contains("tip_um") || !meta["tip_um"].is_array() ||
            meta["tip_um"].size() != 3) {
            throw IoError(tip_meta_path + ": missing tip_um [x, y, z]");
        }
        tip = {meta["tip_um"][0].get<double>(), meta["tip_um"][1].get<double>(),
               meta["tip_um"][2].get<double>()};
    }

    const std::vector<FacePoint> faces = load_faces(faces_path);
    const CtodProfile profile =
        extract_ctod_from_surface(faces, tip, ctx.cfg.ctod.bin_width_um);

    const double r_min = ctx.cfg.ctod.r_min_um;
    const double r_max = ctx.cfg.ctod.r_max_um;
    const FractureFit fit = fit_ctod(profile, ctx.cfg.material, r_min, r_max);

    NumericTable prof_table;
    prof_table.columns = {"r_um", "delta_um", "delta_fit_um"};
    for (const CtodSample& s : profile.samples) {
        const double r_eff_m = (s.r_um + fit.r_tip_offset_um) * 1e-6;
        const double fit_um = r_eff_m > 0.0 ? 1e6 * fit.c_sqrt_m * std::sqrt(r_eff_m) : 0.0;
        prof_table.rows.push_back({s.r_um, s.delta_um, fit_um});
    }

    // window sensitivity: same fit on perturbed windows, failures reported
    json sensitivity = json::array();
    const double windows[][2] = {{0.8 * r_min, r_max},
                                 {1.2 * r_min, r_max},
                                 {r_min, 0.8 * r_max},
                                 {r_min, 1.2 * r_max}};
    for (const auto& w : windows) {
        json entry{{"r_min_um", w[0]}, {"r_max_um", w[1]}};
        try {
            const FractureFit alt = fit_ctod(profile, ctx.cfg.material, w[0], w[1]);
            entry["gc_j_m2"] = alt.gc_j_m2;
            entry["k1_pa_sqrt_m"] = alt.k1_pa_sqrt_m;
            entry["fit_rms_um"] = alt.fit_rms_um;
            std::printf("fit-ctod: window [%g, %g] um -> G_c %.6g J/m^2\n", w[0], w[1],
                        alt.gc_j_m2);
        } catch (const Error& err) {
            entry["error"] = err.what();
            std::printf("fit-ctod: window [%g, %g] um -> no fit (%s)\n", w[0], w[1], err.what());
        }
        sensitivity.push_back(entry);
    }

    json out_json = fit_to_json(fit);
    out_json["tip_um"] = {tip.x, tip.y, tip.z};
    out_json["bin_width_um"] = ctx.cfg.ctod.bin_width_um;
    out_json["window_sensitivity"] = sensitivity;

    const std::string profile_path = ctx.out_path("ctod_profile.csv");
    const std::string fit_path = ctx.out_path("ctod_fit.json");
    write_numeric_table(prof_table, profile_path);
    write_json(fit_path, out_json);
    ctx.record_output(profile_path);
    ctx.record_output(fit_path);
    std::printf("fit-ctod: G_c = %.6g J/m^2, K1 = %.6g Pa sqrt(m), rms %.4g um over [%g, %g] um "
                "-> %s\n",
                fit.gc_j_m2, fit.k1_pa_sqrt_m, fit.fit_rms_um, fit.r_min_um, fit.r_max_um,
                fit_path.c_str());
    return {profile_path, fit_path};
}

std::vector<std::string> stage_regress(RunContext& ctx, const std::string& points_path) {
    ctx.record_input(points_path);
    const NumericTable t = read_numeric_table(points_path);
    const std::size_t ce = column_of(t, points_path, "e_lig_j");
    const std::size_t cg = column_of(t, points_path, "gc_j_m2");
    std::vector<RegressionPoint> points;
    points.reserve(t.rows.size());
    for (const auto& r : t.rows) points.push_back(RegressionPoint{r[ce], r[cg]});

    const RegressionResult reg = regress_gc_vs_elig(points);

    json points_json = json::array();
    NumericTable plot;
    plot.columns = {"e_lig_j", "gc_j_m2", "gc_fit_j_m2", "residual_j_m2"};
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double fit_g = reg.slope_per_m2 * points[i].e_lig_j + reg.intercept_j_m2;
        points_json.push_back(json{{"e_lig_j", points[i].e_lig_j},
                                   {"gc_j_m2", points[i].gc_j_m2},
                                   {"gc_fit_j_m2", fit_g},
                                   {"residual_j_m2", reg.residuals_j_m2[i]}});
        plot.rows.push_back({points[i].e_lig_j, points[i].gc_j_m2, fit_g,
                             reg.residuals_j_m2[i]});
    }

    const std::string reg_path = ctx.out_path("regression.json");
    const std::string plot_path = ctx.out_path("regression_plot.csv");
    write_json(reg_path, json{{"slope_per_m2", reg.slope_per_m2},
                              {"intercept_j_m2", reg.intercept_j_m2},
                              {"r_squared", reg.r_squared},
                              {"n_points", reg.n_points},
                              {"points", points_json}});
    write_numeric_table(plot, plot_path);
    ctx.record_output(reg_path);
    ctx.record_output(plot_path);
    std::printf("regress: G_c = %.6g * E_lig + %.6g, r^2 = %.6g over %zu points -> %s\n",
                reg.slope_per_m2, reg.intercept_j_m2, reg.r_squared, reg.n_points,
                reg_path.c_str());
    return {reg_path, plot_path};
}

std::vector<std::string> stage_report(RunContext& ctx, const std::string& regression_path) {
    ctx.record_input(regression_path);
    const json reg = read_json(regression_path);
    for (const char* key : {"slope_per_m2", "intercept_j_m2", "r_squared", "n_points"}) {
        if (!reg.contains(key)) throw IoError(regression_path + ": missing '" + key + "'");
    }

    char buf[256];
    std::string text;
    text += "crackfield report\n";
    text += "=================\n\n";
    text += "fracture energy vs ligament elastic energy\n";
    text += "model: G_c = slope * E_lig + intercept\n\n";
    std::snprintf(buf, sizeof buf, "  slope      %.3g m^-2\n",
                  reg["slope_per_m2"].get<double>());
    text += buf;
    std::snprintf(buf, sizeof buf, "  intercept  %.3g J/m^2\n",
                  reg["intercept_j_m2"].get<double>());
    text += buf;
    std::snprintf(buf, sizeof buf, "  r^2        %.6g\n", reg["r_squared"].get<double>());
    text += buf;
    std::snprintf(buf, sizeof buf, "  points     %zu\n",
                  reg["n_points"].get<std::size_t>());
    text += buf;
    if (reg.contains("points") && reg["points"].is_array() && !reg["points"].empty()) {
        text += "\n  E_lig [J]      G_c [J/m^2]    fit [J/m^2]    residual [J/m^2]\n";
        for (const json& p : reg["points"]) {
            std::snprintf(buf, sizeof buf, "  %-14.6g %-14.6g %-14.6g %-.6g\n",
                          p["e_lig_j"].get<double>(), p["gc_j_m2"].get<double>(),
                          p["gc_fit_j_m2"].get<double>(), p["residual_j_m2"].get<double>());
            text += buf;
        }
    }

    const std::string out = ctx.out_path("report.txt");
    write_text(out, text);
    ctx.record_output(out);
    std::fputs(text.c_str(), stdout);
    std::printf("report -> %s\n", out.c_str());
    return {out};
}

namespace {

// opt-in stage cache: a stage is skipped when its key (config + stage name +
// input hashes) matches and its recorded outputs still match the files on
// disk. The record keeps the stage's manifest delta (inputs and outputs, in
// order) so a cached replay produces the exact manifest a fresh run would.
struct StageCache {
    std::string path;
    json state = json::object();
    bool enabled = false;

    void load() {
        if (!enabled || !std::filesystem::exists(path)) return;
        state = json::parse(std::ifstream(path), nullptr, false);
        if (state.is_discarded() || !state.is_object()) state = json::object();
    }
    bool hit(const std::string& stage, const std::string& key) const {
        if (!enabled || !state.contains(stage)) return false;
        const json& s = state[stage];
        if (!s.contains("key") || s["key"] != key) return false;
        if (!s.contains("inputs") || !s.contains("outputs") || !s["outputs"].is_array()) {
            return false;
        }
        for (const json& o : s["outputs"]) {
            const std::string file = o["path"].get<std::string>();
            if (!std::filesystem::exists(file)) return false;
            if (sha256_file_hex(file) != o["sha256"].get<std::string>()) return false;
        }
        return true;
    }
    static json records_json(const std::vector<FileRecord>& records, std::size_t from) {
        json arr = json::array();
        for (std::size_t i = from; i < records.size(); ++i) {
            arr.push_back(json{{"path", records[i].path}, {"sha256", records[i].sha256}});
        }
        return arr;
    }
    void store(const std::string& stage, const std::string& key, const RunContext& ctx,
               std::size_t in_from, std::size_t out_from) {
        if (!enabled) return;
        state[stage] = json{{"key", key},
                            {"inputs", records_json(ctx.manifest.inputs, in_from)},
                            {"outputs", records_json(ctx.manifest.outputs, out_from)}};
        write_json(path, state);
    }
    // replays the stored manifest delta; input hashes are vouched for by the
    // key match, output hashes were just re-verified in hit()
    std::vector<std::string> replay(const std::string& stage, RunContext& ctx) const {
        const json& s = state[stage];
        for (const json& r : s["inputs"]) {
            ctx.manifest.inputs.push_back(FileRecord{r["path"], r["sha256"]});
        }
        std::vector<std::string> out;
        for (const json& r : s["outputs"]) {
            ctx.manifest.outputs.push_back(FileRecord{r["path"], r["sha256"]});
            out.push_back(r["path"].get<std::string>());
        }
        return out;
    }
};

} // namespace

std::vector<std::string> stage_pipeline(RunContext& ctx, bool cache) {
    using Clock = std::chrono::steady_clock;
    StageCache cache_state;
    cache_state.path = ctx.out_path("pipeline_cache.json");
    cache_state.enabled = cache;
    cache_state.load();

    std::vector<std::string> all;
    const auto run_stage = [&](const std::string& name,
                               const std::vector<std::string>& inputs,
                               const std::function<std::vector<std::string>()>& fn) {
        Sha256 keyer;
        keyer.update(ctx.cfg.canonical_json());
        keyer.update(name);
        char seed_buf[32];
        std::snprintf(seed_buf, sizeof seed_buf, "%llu",
                      static_cast<unsigned long long>(ctx.seed));
        keyer.update(seed_buf);
        for (const std::string& in : inputs) keyer.update(sha256_file_hex(in));
        const std::string key = keyer.hex_digest();

        StageRecord record;
        record.name = name;
        const auto t0 = Clock::now();
        if (cache_state.hit(name, key)) {
            record.outputs = cache_state.replay(name, ctx);
            std::printf("pipeline: %s (cached)\n", name.c_str());
        } else {
            const std::size_t in_from = ctx.manifest.inputs.size();
            const std::size_t out_from = ctx.manifest.outputs.size();
            record.outputs = fn();
            cache_state.store(name, key, ctx, in_from, out_from);
        }
        record.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        ctx.manifest.stages.push_back(record);
        all.insert(all.end(), record.outputs.begin(), record.outputs.end());
    };

    const std::string particles = ctx.out_path("stepped_particles.csv");
    const std::string faces = ctx.out_path("stepped_faces.csv");
    const std::string meta = ctx.out_path("stepped_meta.json");
    const std::string gradient = ctx.out_path("gradient.csv");
    const std::string energy = ctx.out_path("energy.csv");

    run_stage("synth-stepped", {}, [&] { return stage_synth_stepped(ctx); });
    run_stage("gradient", {particles}, [&] { return stage_gradient(ctx, particles); });
    run_stage("energy", {gradient}, [&] { return stage_energy(ctx, gradient); });
    run_stage("region-energy", {energy}, [&] { return stage_region_energy(ctx, energy); });
    run_stage("fit-ctod", {faces, meta}, [&] { return stage_fit_ctod(ctx, faces, meta); });

    // summary joins the stage outputs back together for the suite driver
    const json region = read_json(ctx.out_path("region_energy.json"));
    const json fit = read_json(ctx.out_path("ctod_fit.json"));
    const json meta_json = read_json(meta);
    const std::string summary = ctx.out_path("pipeline_summary.json");
    write_json(summary, json{{"e_lig_j", region["e_lig_j"]},
                             {"gc_j_m2", fit["gc_j_m2"]},
                             {"n_region_particles", region["n_particles"]},
                             {"coverage", region["coverage"]},
                             {"e_lig_closed_form_j", meta_json["e_lig_closed_form_j"]},
                             {"gc_true_j_m2", meta_json["gc_true_j_m2"]},
                             {"lambda_ligament", meta_json["lambda_ligament"]}});
    ctx.record_output(summary);
    all.push_back(summary);
    std::printf("pipeline: E_lig = %.6g J, G_c = %.6g J/m^2 -> %s\n",
                region["e_lig_j"].get<double>(), fit["gc_j_m2"].get<double>(), summary.c_str());
    return all;
}

} // namespace crackfield::cli
