#include "crackfield/regions.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "crackfield/errors.hpp"
#include "crackfield/parallel.hpp"

namespace crackfield {

namespace {
constexpr double kFourThirdsPi = 4.18879020478639098462;  // 4*pi/3

bool in_interval(double v, double lo, double hi) { return v >= lo && v <= hi; }
} // namespace

void RegionSpec::validate() const {
    switch (kind) {
        case Kind::Box:
            if (!box.valid()) throw ConfigError("RegionSpec: box corners out of order");
            break;
        case Kind::LigamentGeometric:
            if (!(ligament.x_back_um < ligament.x_front_um)) {
                throw ConfigError("RegionSpec: ligament x interval empty");
            }
            if (!(ligament.z_lo_um < ligament.z_hi_um)) {
                throw ConfigError("RegionSpec: ligament z overlap empty");
            }
            if (!(ligament.y_half_width_um > 0.0)) {
                throw ConfigError("RegionSpec: ligament y half-width must be > 0");
            }
            break;
        case Kind::FieldThreshold:
            if (!(threshold.quantile > 0.0 && threshold.quantile < 1.0)) {
                throw ConfigError("RegionSpec: threshold quantile must be in (0,1)");
            }
            break;
        case Kind::Intersection:
            if (parts.empty()) throw ConfigError("RegionSpec: intersection of nothing");
            for (const RegionSpec& p : parts) p.validate();
            break;
    }
}

namespace {

// threshold value for one FieldThreshold spec
double field_cut(const ScalarField& field, double q) {
    std::vector<double> vals;
    vals.reserve(field.samples.size());
    for (const ScalarSample& s : field.samples) {
        if (s.valid) vals.push_back(s.value);
    }
    if (vals.empty()) throw InvalidInputError("select_region: threshold field has no valid values");
    std::sort(vals.begin(), vals.end());
    const auto idx =
        static_cast<std::size_t>(q * static_cast<double>(vals.size() - 1));
    return vals[idx];
}

bool member(const RegionSpec& spec, const ParticleSet& set, std::size_t i,
            const ScalarField* field) {
    const Vec3& X = set.track(i).X;
    switch (spec.kind) {
        case RegionSpec::Kind::Box:
            return spec.box.contains(X);
        case RegionSpec::Kind::LigamentGeometric: {
            const RegionSpec::Ligament& l = spec.ligament;
            return in_interval(X.x, l.x_back_um, l.x_front_um) &&
                   in_interval(X.z, l.z_lo_um, l.z_hi_um) &&
                   std::abs(X.y - l.y_center_um) <= l.y_half_width_um;
        }
        case RegionSpec::Kind::FieldThreshold: {
            const ScalarSample& s = field->samples[i];
            return s.valid && s.value >= spec.threshold.quantile_cut;
        }
        case RegionSpec::Kind::Intersection:
            for (const RegionSpec& p : spec.parts) {
                if (!member(p, set, i, field)) return false;
            }
            return true;
    }
    return false;
}

bool needs_field(const RegionSpec& spec) {
    if (spec.kind == RegionSpec::Kind::FieldThreshold) return true;
    for (const RegionSpec& p : spec.parts) {
        if (needs_field(p)) return true;
    }
    return false;
}

// resolve quantiles to concrete cuts up front so membership is a pure predicate
void resolve_cuts(RegionSpec& spec, const ScalarField& field) {
    if (spec.kind == RegionSpec::Kind::FieldThreshold) {
        spec.threshold.quantile_cut = field_cut(field, spec.threshold.quantile);
    }
    for (RegionSpec& p : spec.parts) resolve_cuts(p, field);
}

} // namespace

std::vector<std::int64_t> select_region(const ParticleSet& set, const RegionSpec& spec,
                                        const ScalarField* field) {
    spec.validate();
    RegionSpec resolved = spec;
    if (needs_field(resolved)) {
        if (field == nullptr) {
            throw InvalidInputError("select_region: threshold spec requires a field");
        }
        if (field->samples.size() != set.size()) {
            throw InvalidInputError("select_region: field does not match particle set");
        }
        resolve_cuts(resolved, *field);
    }

    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (member(resolved, set, i, field)) out.push_back(set.track(i).id);
    }
    return out;
}

RadialWeights radial_weights(const ParticleSet& set, int k_vol,
                             const std::optional<Aabb>& calibration_box_um, int threads) {
    if (k_vol < 1) throw ConfigError("radial_weights: k_vol must be >= 1");
    if (set.size() <= static_cast<std::size_t>(k_vol)) {
        throw InvalidInputError("radial_weights: need more than k_vol particles");
    }

    RadialWeights w;
    w.k_vol = k_vol;
    w.ids.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) w.ids.push_back(set.track(i).id);
    w.r_um.resize(set.size());

    parallel_for(0, set.size(), threads, [&](std::size_t i) {
        thread_local std::vector<Neighbor> nn;
        set.knn_of(i, static_cast<std::size_t>(k_vol), nn);
        double mean = 0.0;
        for (const Neighbor& n : nn) mean += n.dist;
        mean /= static_cast<double>(nn.size());
        w.r_um[i] = 0.5 * mean;
    });

    const Aabb box = calibration_box_um ? *calibration_box_um : set.bounds().shrunk(0.15);
    if (!box.valid()) throw ConfigError("radial_weights: degenerate calibration box");

    double raw_volume = 0.0;   // sequential sum: independent of thread count
    std::size_t n_in_box = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (box.contains(set.track(i).X)) {
            raw_volume += kFourThirdsPi * w.r_um[i] * w.r_um[i] * w.r_um[i];
            ++n_in_box;
        }
    }
    if (n_in_box == 0 || !(raw_volume > 0.0)) {
        throw InvalidInputError("radial_weights: calibration box contains no particles");
    }
    w.c_cal = std::cbrt(box.volume() / raw_volume);
    for (double& r : w.r_um) r *= w.c_cal;
    return w;
}

RegionEnergy integrate_region_energy(const ScalarField& w,
                                     const std::vector<std::int64_t>& subset,
                                     const RadialWeights& weights) {
    if (w.unit != FieldUnit::JoulePerCubicMeter) {
        throw UnitMismatchError("integrate_region_energy: field unit must be J/m^3, got " +
                                std::string(to_string(w.unit)));
    }
    if (weights.ids.size() != weights.r_um.size()) {
        throw InvalidInputError("integrate_region_energy: malformed weights");
    }

    std::unordered_map<std::int64_t, std::size_t> field_of, weight_of;
    field_of.reserve(w.samples.size());
    for (std::size_t i = 0; i < w.samples.size(); ++i) field_of[w.samples[i].particle_id] = i;
    weight_of.reserve(weights.ids.size());
    for (std::size_t i = 0; i < weights.ids.size(); ++i) weight_of[weights.ids[i]] = i;

    RegionEnergy out;
    out.n_particles = subset.size();
    std::size_t n_valid = 0;
    for (const std::int64_t id : subset) {
        const auto fit = field_of.find(id);
        const auto wit = weight_of.find(id);
        if (fit == field_of.end() || wit == weight_of.end()) {
            throw InvalidInputError("integrate_region_energy: particle id " + std::to_string(id) +
                                    " missing from field or weights");
        }
        const ScalarSample& s = w.samples[fit->second];
        if (!s.valid) continue;
        const double r_m = weights.r_um[wit->second] * 1e-6;
        const double cell_m3 = kFourThirdsPi * r_m * r_m * r_m;
        out.e_joule += s.value * cell_m3;
        out.volume_estimate_m3 += cell_m3;
        ++n_valid;
    }
    out.coverage = subset.empty()
                       ? 1.0
                       : static_cast<double>(n_valid) / static_cast<double>(subset.size());
    return out;
}

} // namespace crackfield
