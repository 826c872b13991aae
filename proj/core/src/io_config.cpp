#include "crackfield/io/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "crackfield/errors.hpp"

extern "C" char** environ;   // for the CRACKFIELD_* override scan

namespace crackfield {

using nlohmann::json;

void CtodConfig::validate() const {
    if (!(r_min_um >= 0.0) || !(r_max_um > r_min_um)) {
        throw ConfigError("ctod: need 0 <= r_min_um < r_max_um");
    }
    if (!(bin_width_um > 0.0)) throw ConfigError("ctod: bin_width_um must be > 0");
    if (!tip_um.finite()) throw ConfigError("ctod: tip_um must be finite");
}

void VolumeWeightConfig::validate() const {
    if (k_vol < 1) throw ConfigError("volume_weights: k_vol must be >= 1");
    if (calibration_box_um && !calibration_box_um->valid()) {
        throw ConfigError("volume_weights: calibration_box_um is empty or inverted");
    }
}

void PipelineConfig::validate() const {
    material.validate();
    estimator.validate();
    region.validate();
    volume_weights.validate();
    ctod.validate();
    imaging.validate();
    // phantom is validated by the stages that generate from it; an
    // analysis-only run never needs one specified
    if (!(strict_invalid_fraction >= 0.0 && strict_invalid_fraction <= 1.0)) {
        throw ConfigError("strict_invalid_fraction must be in [0,1]");
    }
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (paths.out_dir.empty()) throw ConfigError("paths.out_dir must not be empty");
}

namespace {

// ---- serialization ----

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

json aabb_json(const Aabb& b) {
    return json{{"lo_um", vec3_json(b.lo)}, {"hi_um", vec3_json(b.hi)}};
}

const char* weight_scale_name(EstimatorConfig::WeightScale m) {
    return m == EstimatorConfig::WeightScale::FixedH ? "fixed_h" : "kth_neighbor";
}

const char* region_kind_name(RegionSpec::Kind k) {
    switch (k) {
        case RegionSpec::Kind::Box: return "box";
        case RegionSpec::Kind::LigamentGeometric: return "ligament";
        case RegionSpec::Kind::FieldThreshold: return "field_threshold";
        case RegionSpec::Kind::Intersection: return "intersection";
    }
    return "box";
}

json region_json(const RegionSpec& r) {
    json j;
    j["kind"] = region_kind_name(r.kind);
    j["box"] = aabb_json(r.box);
    j["ligament"] = json{{"x_back_um", r.ligament.x_back_um},
                         {"x_front_um", r.ligament.x_front_um},
                         {"z_lo_um", r.ligament.z_lo_um},
                         {"z_hi_um", r.ligament.z_hi_um},
                         {"y_center_um", r.ligament.y_center_um},
                         {"y_half_width_um", r.ligament.y_half_width_um}};
    j["threshold"] = json{{"quantile", r.threshold.quantile}};
    json parts = json::array();
    for (const RegionSpec& p : r.parts) parts.push_back(region_json(p));
    j["parts"] = parts;
    return j;
}

json config_json(const PipelineConfig& c) {
    json j;
    j["material"] = {{"mu_pa", c.material.mu_pa}, {"use_isochoric", c.material.use_isochoric}};
    j["estimator"] = {{"k_neighbors", c.estimator.k_neighbors},
                      {"weight_scale", weight_scale_name(c.estimator.weight_scale_mode)},
                      {"fixed_h_um", c.estimator.fixed_h_um},
                      {"min_neighbors", c.estimator.min_neighbors},
                      {"max_condition", c.estimator.max_condition}};
    j["region"] = region_json(c.region);
    j["volume_weights"] = {
        {"k_vol", c.volume_weights.k_vol},
        {"calibration_box_um", c.volume_weights.calibration_box_um
                                   ? aabb_json(*c.volume_weights.calibration_box_um)
                                   : json(nullptr)}};
    j["ctod"] = {{"r_min_um", c.ctod.r_min_um},
                 {"r_max_um", c.ctod.r_max_um},
                 {"bin_width_um", c.ctod.bin_width_um},
                 {"tip_um", vec3_json(c.ctod.tip_um)}};
    const ImagingConfig& im = c.imaging;
    j["imaging"] = {{"nx", im.nx},
                    {"ny", im.ny},
                    {"nz", im.nz},
                    {"dx_um", im.dx_um},
                    {"dy_um", im.dy_um},
                    {"dz_um", im.dz_um},
                    {"psf_sigma_lateral_um", im.psf_sigma_lateral_um},
                    {"psf_sigma_axial_um", im.psf_sigma_axial_um},
                    {"blob_diameter_um", im.blob_diameter_um},
                    {"peak_amplitude", im.peak_amplitude},
                    {"gel_intensity", im.gel_intensity},
                    {"noise_sigma", im.noise_sigma},
                    {"noise_offset", im.noise_offset},
                    {"bp_sigma1_lateral_um", im.bp_sigma1_lateral_um},
                    {"bp_sigma1_axial_um", im.bp_sigma1_axial_um},
                    {"bp_sigma_ratio", im.bp_sigma_ratio},
                    {"peak_threshold", im.peak_threshold},
                    {"peak_threshold_quantile", im.peak_threshold_quantile},
                    {"auto_threshold_k", im.auto_threshold_k},
                    {"centroid_half_xy", im.centroid_half_xy},
                    {"centroid_half_z", im.centroid_half_z},
                    {"link_max_disp_um", im.link_max_disp_um},
                    {"link_predictor", im.link_predictor},
                    {"link_grid_um", im.link_grid_um}};
    const SteppedCrackPhantom& ph = c.phantom;
    j["phantom"] = {{"bounds_um", aabb_json(ph.bounds_um)},
                    {"step_height_um", ph.step_height_um},
                    {"y_mid_um", ph.y_mid_um},
                    {"front1_x_um", ph.front1_x_um},
                    {"front1_z_lo_um", ph.front1_z_lo_um},
                    {"front1_z_hi_um", ph.front1_z_hi_um},
                    {"front2_x_um", ph.front2_x_um},
                    {"front2_z_lo_um", ph.front2_z_lo_um},
                    {"front2_z_hi_um", ph.front2_z_hi_um},
                    {"density_per_um3", ph.density_per_um3},
                    {"far_field_stretch", ph.far_field_stretch},
                    {"lig_amplification", ph.lig_amplification},
                    {"blend_length_um", ph.blend_length_um},
                    {"block_decay_um", ph.block_decay_um},
                    {"label_inset_um", ph.label_inset_um},
                    {"k_far_pa_sqrt_m", ph.k_far_pa_sqrt_m},
                    {"k_bulk_pa_sqrt_m", ph.k_bulk_pa_sqrt_m},
                    {"mu_pa", ph.mu_pa}};
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["strict_invalid_fraction"] = c.strict_invalid_fraction;
    j["paths"] = {{"out_dir", c.paths.out_dir},
                  {"particles", c.paths.particles},
                  {"scatter_reference", c.paths.scatter_reference},
                  {"scatter_deformed", c.paths.scatter_deformed},
                  {"faces", c.paths.faces}};
    return j;
}

// ---- strict parsing ----

// object wrapper that tracks consumed keys; finish() rejects leftovers
class ObjReader {
public:
    ObjReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    std::string sub(const char* key) const { return path_ + "." + key; }

    const json* take(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void read(const char* key, double& out) {
        if (const json* p = take(key)) {
            if (!p->is_number()) throw ConfigError(sub(key) + ": expected a number");
            out = p->get<double>();
        }
    }
    void read(const char* key, int& out) {
        if (const json* p = take(key)) {
            if (!p->is_number_integer()) throw ConfigError(sub(key) + ": expected an integer");
            out = p->get<int>();
        }
    }
    void read(const char* key, std::uint32_t& out) {
        if (const json* p = take(key)) {
            if (!p->is_number_integer() || p->get<std::int64_t>() < 0) {
                throw ConfigError(sub(key) + ": expected a nonnegative integer");
            }
            out = p->get<std::uint32_t>();
        }
    }
    void read(const char* key, std::uint64_t& out) {
        if (const json* p = take(key)) {
            if (!(p->is_number_unsigned() ||
                  (p->is_number_integer() && p->get<std::int64_t>() >= 0))) {
                throw ConfigError(sub(key) + ": expected a nonnegative integer");
            }
            out = p->get<std::uint64_t>();
        }
    }
    void read(const char* key, bool& out) {
        if (const json* p = take(key)) {
            if (!p->is_boolean()) throw ConfigError(sub(key) + ": expected true/false");
            out = p->get<bool>();
        }
    }
    void read(const char* key, std::string& out) {
        if (const json* p = take(key)) {
            if (!p->is_string()) throw ConfigError(sub(key) + ": expected a string");
            out = p->get<std::string>();
        }
    }

    void finish() {
        for (const auto& item : j_.items()) {
            if (seen_.find(item.key()) == seen_.end()) {
                throw ConfigError("unknown config key: " + path_ + "." + item.key());
            }
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Vec3 parse_vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) {
        throw ConfigError(path + ": expected an array of three numbers");
    }
    Vec3 v;
    for (int c = 0; c < 3; ++c) {
        if (!j[static_cast<std::size_t>(c)].is_number()) {
            throw ConfigError(path + ": expected an array of three numbers");
        }
        v[c] = j[static_cast<std::size_t>(c)].get<double>();
    }
    return v;
}

Aabb parse_aabb(const json& j, const std::string& path) {
    ObjReader r(j, path);
    Aabb b;
    if (const json* p = r.take("lo_um")) b.lo = parse_vec3(*p, path + ".lo_um");
    if (const json* p = r.take("hi_um")) b.hi = parse_vec3(*p, path + ".hi_um");
    r.finish();
    return b;
}

RegionSpec parse_region(const json& j, const std::string& path) {
    ObjReader r(j, path);
    RegionSpec spec;
    std::string kind = region_kind_name(spec.kind);
    r.read("kind", kind);
    if (kind == "box") {
        spec.kind = RegionSpec::Kind::Box;
    } else if (kind == "ligament") {
        spec.kind = RegionSpec::Kind::LigamentGeometric;
    } else if (kind == "field_threshold") {
        spec.kind = RegionSpec::Kind::FieldThreshold;
    } else if (kind == "intersection") {
        spec.kind = RegionSpec::Kind::Intersection;
    } else {
        throw ConfigError(r.sub("kind") + ": unknown region kind '" + kind + "'");
    }
    if (const json* p = r.take("box")) spec.box = parse_aabb(*p, path + ".box");
    if (const json* p = r.take("ligament")) {
        ObjReader lr(*p, path + ".ligament");
        lr.read("x_back_um", spec.ligament.x_back_um);
        lr.read("x_front_um", spec.ligament.x_front_um);
        lr.read("z_lo_um", spec.ligament.z_lo_um);
        lr.read("z_hi_um", spec.ligament.z_hi_um);
        lr.read("y_center_um", spec.ligament.y_center_um);
        lr.read("y_half_width_um", spec.ligament.y_half_width_um);
        lr.finish();
    }
    if (const json* p = r.take("threshold")) {
        ObjReader tr(*p, path + ".threshold");
        tr.read("quantile", spec.threshold.quantile);
        tr.finish();
    }
    if (const json* p = r.take("parts")) {
        if (!p->is_array()) throw ConfigError(path + ".parts: expected an array");
        for (std::size_t i = 0; i < p->size(); ++i) {
            spec.parts.push_back(
                parse_region((*p)[i], path + ".parts[" + std::to_string(i) + "]"));
        }
    }
    r.finish();
    return spec;
}

PipelineConfig parse_config_root(const json& j, const std::string& source) {
    PipelineConfig c;
    ObjReader root(j, source);

    if (const json* p = root.take("material")) {
        ObjReader r(*p, source + ".material");
        r.read("mu_pa", c.material.mu_pa);
        r.read("use_isochoric", c.material.use_isochoric);
        r.finish();
    }
    if (const json* p = root.take("estimator")) {
        ObjReader r(*p, source + ".estimator");
        r.read("k_neighbors", c.estimator.k_neighbors);
        std::string mode = weight_scale_name(c.estimator.weight_scale_mode);
        r.read("weight_scale", mode);
        if (mode == "kth_neighbor") {
            c.estimator.weight_scale_mode = EstimatorConfig::WeightScale::KthNeighborDistance;
        } else if (mode == "fixed_h") {
            c.estimator.weight_scale_mode = EstimatorConfig::WeightScale::FixedH;
        } else {
            throw ConfigError(r.sub("weight_scale") + ": unknown mode '" + mode + "'");
        }
        r.read("fixed_h_um", c.estimator.fixed_h_um);
        r.read("min_neighbors", c.estimator.min_neighbors);
        r.read("max_condition", c.estimator.max_condition);
        r.finish();
    }
    if (const json* p = root.take("region")) c.region = parse_region(*p, source + ".region");
    if (const json* p = root.take("volume_weights")) {
        ObjReader r(*p, source + ".volume_weights");
        r.read("k_vol", c.volume_weights.k_vol);
        if (const json* box = r.take("calibration_box_um")) {
            if (box->is_null()) {
                c.volume_weights.calibration_box_um.reset();
            } else {
                c.volume_weights.calibration_box_um =
                    parse_aabb(*box, source + ".volume_weights.calibration_box_um");
            }
        }
        r.finish();
    }
    if (const json* p = root.take("ctod")) {
        ObjReader r(*p, source + ".ctod");
        r.read("r_min_um", c.ctod.r_min_um);
        r.read("r_max_um", c.ctod.r_max_um);
        r.read("bin_width_um", c.ctod.bin_width_um);
        if (const json* tip = r.take("tip_um")) {
            c.ctod.tip_um = parse_vec3(*tip, source + ".ctod.tip_um");
        }
        r.finish();
    }
    if (const json* p = root.take("imaging")) {
        ObjReader r(*p, source + ".imaging");
        ImagingConfig& im = c.imaging;
        r.read("nx", im.nx);
        r.read("ny", im.ny);
        r.read("nz", im.nz);
        r.read("dx_um", im.dx_um);
        r.read("dy_um", im.dy_um);
        r.read("dz_um", im.dz_um);
        r.read("psf_sigma_lateral_um", im.psf_sigma_lateral_um);
        r.read("psf_sigma_axial_um", im.psf_sigma_axial_um);
        r.read("blob_diameter_um", im.blob_diameter_um);
        r.read("peak_amplitude", im.peak_amplitude);
        r.read("gel_intensity", im.gel_intensity);
        r.read("noise_sigma", im.noise_sigma);
        r.read("noise_offset", im.noise_offset);
        r.read("bp_sigma1_lateral_um", im.bp_sigma1_lateral_um);
        r.read("bp_sigma1_axial_um", im.bp_sigma1_axial_um);
        r.read("bp_sigma_ratio", im.bp_sigma_ratio);
        r.read("peak_threshold", im.peak_threshold);
        r.read("peak_threshold_quantile", im.peak_threshold_quantile);
        r.read("auto_threshold_k", im.auto_threshold_k);
        r.read("centroid_half_xy", im.centroid_half_xy);
        r.read("centroid_half_z", im.centroid_half_z);
        r.read("link_max_disp_um", im.link_max_disp_um);
        r.read("link_predictor", im.link_predictor);
        r.read("link_grid_um", im.link_grid_um);
        r.finish();
    }
    if (const json* p = root.take("phantom")) {
        ObjReader r(*p, source + ".phantom");
        SteppedCrackPhantom& ph = c.phantom;
        if (const json* b = r.take("bounds_um")) {
            ph.bounds_um = parse_aabb(*b, source + ".phantom.bounds_um");
        }
        r.read("step_height_um", ph.step_height_um);
        r.read("y_mid_um", ph.y_mid_um);
        r.read("front1_x_um", ph.front1_x_um);
        r.read("front1_z_lo_um", ph.front1_z_lo_um);
        r.read("front1_z_hi_um", ph.front1_z_hi_um);
        r.read("front2_x_um", ph.front2_x_um);
        r.read("front2_z_lo_um", ph.front2_z_lo_um);
        r.read("front2_z_hi_um", ph.front2_z_hi_um);
        r.read("density_per_um3", ph.density_per_um3);
        r.read("far_field_stretch", ph.far_field_stretch);
        r.read("lig_amplification", ph.lig_amplification);
        r.read("blend_length_um", ph.blend_length_um);
        r.read("block_decay_um", ph.block_decay_um);
        r.read("label_inset_um", ph.label_inset_um);
        r.read("k_far_pa_sqrt_m", ph.k_far_pa_sqrt_m);
        r.read("k_bulk_pa_sqrt_m", ph.k_bulk_pa_sqrt_m);
        r.read("mu_pa", ph.mu_pa);
        r.finish();
    }
    root.read("seed", c.seed);
    root.read("threads", c.threads);
    root.read("strict_invalid_fraction", c.strict_invalid_fraction);
    if (const json* p = root.take("paths")) {
        ObjReader r(*p, source + ".paths");
        r.read("out_dir", c.paths.out_dir);
        r.read("particles", c.paths.particles);
        r.read("scatter_reference", c.paths.scatter_reference);
        r.read("scatter_deformed", c.paths.scatter_deformed);
        r.read("faces", c.paths.faces);
        r.finish();
    }
    root.finish();
    return c;
}

// ---- environment overrides ----

// CRACKFIELD_A__B_C=value  ->  path a.b_c (double underscore nests)
std::vector<std::pair<std::vector<std::string>, std::string>> env_overrides() {
    std::vector<std::pair<std::vector<std::string>, std::string>> out;
    const std::string prefix = "CRACKFIELD_";
    for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
        const std::string entry(*e);
        if (entry.rfind(prefix, 0) != 0) continue;
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = entry.substr(prefix.size(), eq - prefix.size());
        const std::string value = entry.substr(eq + 1);

        std::vector<std::string> path;
        std::size_t start = 0;
        while (start <= name.size()) {
            const std::size_t sep = name.find("__", start);
            std::string part = sep == std::string::npos ? name.substr(start)
                                                        : name.substr(start, sep - start);
            for (char& ch : part) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            path.push_back(part);
            if (sep == std::string::npos) break;
            start = sep + 2;
        }
        out.emplace_back(std::move(path), value);
    }
    // apply in sorted order so the override set has one deterministic effect
    std::sort(out.begin(), out.end());
    return out;
}

void apply_override(json& doc, const std::vector<std::string>& path, const std::string& value,
                    const std::string& env_name) {
    json* node = &doc;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (!node->is_object() || !node->contains(path[i])) {
            throw ConfigError("environment override " + env_name +
                              " names an unknown config section '" + path[i] + "'");
        }
        node = &(*node)[path[i]];
    }
    if (!node->is_object()) {
        throw ConfigError("environment override " + env_name + " does not name an object key");
    }
    // the strict parser rejects unknown keys later; inserting here would mask
    // the full-path message, so reject eagerly with the env name
    if (!node->contains(path.back())) {
        throw ConfigError("environment override " + env_name + " names an unknown config key '" +
                          path.back() + "'");
    }
    json parsed = json::parse(value, nullptr, false);
    (*node)[path.back()] = parsed.is_discarded() ? json(value) : parsed;
}

} // namespace

std::string PipelineConfig::canonical_json() const { return config_json(*this).dump(); }

PipelineConfig parse_config(const std::string& json_text, const std::string& source) {
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(source + ": not valid JSON");
    PipelineConfig c = parse_config_root(doc, source);
    c.validate();
    return c;
}

PipelineConfig load_config(const std::string& path, bool apply_env) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw ConfigError("config read failed: " + path);

    json doc = json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path + ": not valid JSON");

    if (apply_env) {
        // overrides may touch sections the file omits; run the file through
        // the strict parser first, then materialize every key so any known
        // override path has a place to land
        PipelineConfig from_file = parse_config_root(doc, path);
        json full = config_json(from_file);
        for (const auto& [opath, value] : env_overrides()) {
            std::string env_name = "CRACKFIELD_";
            for (std::size_t i = 0; i < opath.size(); ++i) {
                if (i > 0) env_name += "__";
                for (const char ch : opath[i]) {
                    env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
                }
            }
            apply_override(full, opath, value, env_name);
        }
        PipelineConfig c = parse_config_root(full, path);
        c.validate();
        return c;
    }

    PipelineConfig c = parse_config_root(doc, path);
    c.validate();
    return c;
}

void write_config(const PipelineConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write config: " + path);
    out << config_json(cfg).dump(2) << "\n";
    if (!out) throw IoError("config write failed: " + path);
}

} // namespace crackfield
