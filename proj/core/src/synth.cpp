#include "crackfield/synth.hpp"

#include <algorithm>
#include <cmath>

#include "crackfield/errors.hpp"
#include "crackfield/rng.hpp"

namespace crackfield {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

Vec3 uniform_in(Rng& rng, const Aabb& b) {
    // component order fixed: x, y, z
    const double x = rng.uniform(b.lo.x, b.hi.x);
    const double y = rng.uniform(b.lo.y, b.hi.y);
    const double z = rng.uniform(b.lo.z, b.hi.z);
    return {x, y, z};
}

// cosine step: 1 at t <= 0, 0 at t >= 1
double cos_fall(double t) {
    if (t <= 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    return 0.5 * (1.0 + std::cos(kPi * t));
}

// 1 inside [lo, hi], cosine-fading to 0 over L outside
double outside_ramp(double v, double lo, double hi, double len) {
    if (v < lo) return cos_fall((lo - v) / len);
    if (v > hi) return cos_fall((v - hi) / len);
    return 1.0;
}

// 0 at the interval edges, cosine-rising to 1 over L inside
double inside_taper(double v, double lo, double hi, double len) {
    if (v <= lo || v >= hi) return 0.0;
    const double t = std::min({(v - lo) / len, (hi - v) / len, 1.0});
    return 0.5 * (1.0 - std::cos(kPi * t));
}
} // namespace

ParticleSet gen_affine(std::size_t n, const Aabb& bounds_um, const Mat3& f0, const Vec3& c_um,
                       std::uint64_t seed) {
    if (n == 0) throw ConfigError("gen_affine: n must be > 0");
    if (!bounds_um.valid()) throw ConfigError("gen_affine: invalid bounds");
    if (!(f0.det() > 0.0)) throw ConfigError("gen_affine: det F0 must be > 0");

    Rng rng(seed);
    std::vector<ParticleTrack> tracks;
    tracks.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 X = uniform_in(rng, bounds_um);
        tracks.push_back(ParticleTrack{static_cast<std::int64_t>(i), X, f0 * X + c_um, 1.0});
    }
    return build_particle_set(std::move(tracks));
}

void LefmFieldSpec::validate() const {
    if (!(k1_pa_sqrt_m >= 0.0)) throw ConfigError("LefmFieldSpec: K_I must be >= 0");
    if (!(mu_pa > 0.0)) throw ConfigError("LefmFieldSpec: mu_pa must be > 0");
    if (!(kappa > 1.0 && kappa < 3.0)) throw ConfigError("LefmFieldSpec: kappa must be in (1,3)");
    if (!(r_excl_um > 0.0)) throw ConfigError("LefmFieldSpec: exclusion radius must be > 0");
    if (!tip_um.finite()) throw ConfigError("LefmFieldSpec: non-finite tip");
}

Vec3 lefm_displacement_um(const LefmFieldSpec& spec, const Vec3& X_um) {
    const double dx = X_um.x - spec.tip_um.x;
    const double dy = X_um.y - spec.tip_um.y;
    const double r_um = std::hypot(dx, dy);
    if (r_um == 0.0) return {};
    const double th = std::atan2(dy, dx);
    // q folds the m <-> um conversions into one amplitude
    const double q = spec.k1_pa_sqrt_m / (2.0 * spec.mu_pa) * std::sqrt(1e-6 / kTwoPi) * 1e6;
    const double g = q * std::sqrt(r_um) * (spec.kappa - std::cos(th));
    return {g * std::cos(0.5 * th), g * std::sin(0.5 * th), 0.0};
}

Mat3 lefm_def_grad(const LefmFieldSpec& spec, const Vec3& X_um) {
    const double dx = X_um.x - spec.tip_um.x;
    const double dy = X_um.y - spec.tip_um.y;
    const double r = std::hypot(dx, dy);
    if (r == 0.0) throw InvalidInputError("lefm_def_grad: evaluated at the tip");
    const double th = std::atan2(dy, dx);
    const double c = std::cos(th), s = std::sin(th);
    const double ch = std::cos(0.5 * th), sh = std::sin(0.5 * th);

    const double q = spec.k1_pa_sqrt_m / (2.0 * spec.mu_pa) * std::sqrt(1e-6 / kTwoPi) * 1e6;
    const double g = q * std::sqrt(r) * (spec.kappa - c);
    const double g_r = 0.5 * g / r;
    const double g_th = q * std::sqrt(r) * s;

    const double ux_r = g_r * ch;
    const double ux_th = g_th * ch - 0.5 * g * sh;
    const double uy_r = g_r * sh;
    const double uy_th = g_th * sh + 0.5 * g * ch;

    Mat3 f = Mat3::identity();
    f(0, 0) += ux_r * c - ux_th * s / r;
    f(0, 1) += ux_r * s + ux_th * c / r;
    f(1, 0) += uy_r * c - uy_th * s / r;
    f(1, 1) += uy_r * s + uy_th * c / r;
    return f;
}

double lefm_opening_m(const LefmFieldSpec& spec, double r_m) {
    if (!(r_m >= 0.0)) throw InvalidInputError("lefm_opening_m: r must be >= 0");
    return 8.0 * spec.k1_pa_sqrt_m / spec.e_eff_pa() * std::sqrt(r_m / kTwoPi);
}

LefmField gen_lefm_mode1(std::size_t n, const Aabb& bounds_um, const LefmFieldSpec& spec,
                         std::uint64_t seed, std::size_t n_face_points, double face_r_max_um) {
    spec.validate();
    if (n == 0) throw ConfigError("gen_lefm_mode1: n must be > 0");
    if (!bounds_um.valid()) throw ConfigError("gen_lefm_mode1: invalid bounds");
    if (!(face_r_max_um > 0.0)) throw ConfigError("gen_lefm_mode1: face_r_max must be > 0");

    // samplable only if some corner of the xy-rectangle clears the exclusion disk
    double corner_max = 0.0;
    for (const double cx : {bounds_um.lo.x, bounds_um.hi.x}) {
        for (const double cy : {bounds_um.lo.y, bounds_um.hi.y}) {
            corner_max = std::max(corner_max, std::hypot(cx - spec.tip_um.x, cy - spec.tip_um.y));
        }
    }
    if (corner_max <= spec.r_excl_um) {
        throw ConfigError("gen_lefm_mode1: bounds lie inside the tip exclusion disk");
    }

    Rng rng(seed);
    std::vector<ParticleTrack> tracks;
    tracks.reserve(n);
    std::size_t attempts = 0;
    const std::size_t max_attempts = 1000 * n + 1000;
    while (tracks.size() < n) {
        if (++attempts > max_attempts) {
            throw ConfigError("gen_lefm_mode1: exclusion disk rejects nearly all of bounds");
        }
        const Vec3 X = uniform_in(rng, bounds_um);
        if (std::hypot(X.x - spec.tip_um.x, X.y - spec.tip_um.y) < spec.r_excl_um) continue;
        tracks.push_back(ParticleTrack{static_cast<std::int64_t>(tracks.size()), X,
                                       X + lefm_displacement_um(spec, X), 1.0});
    }

    LefmField out;
    out.spec = spec;
    out.set = build_particle_set(std::move(tracks));
    out.face_points.reserve(2 * n_face_points);
    for (std::size_t j = 0; j < n_face_points; ++j) {
        const double r_um =
            (static_cast<double>(j) + 0.5) * face_r_max_um / static_cast<double>(n_face_points);
        const double half_um = 0.5e6 * lefm_opening_m(spec, r_um * 1e-6);
        const Vec3 base{spec.tip_um.x - r_um, spec.tip_um.y, spec.tip_um.z};
        out.face_points.push_back(FacePoint{{base.x, base.y + half_um, base.z}, true});
        out.face_points.push_back(FacePoint{{base.x, base.y - half_um, base.z}, false});
    }
    return out;
}

void SteppedCrackPhantom::validate() const {
    if (!bounds_um.valid()) throw ConfigError("SteppedCrackPhantom: invalid bounds");
    if (!(step_height_um > 0.0)) throw ConfigError("SteppedCrackPhantom: step height must be > 0");
    if (front1_x_um == front2_x_um) {
        throw ConfigError("SteppedCrackPhantom: front x-positions must differ");
    }
    if (!(front1_z_lo_um < front1_z_hi_um) || !(front2_z_lo_um < front2_z_hi_um)) {
        throw ConfigError("SteppedCrackPhantom: each segment needs a nonempty z-interval");
    }
    if (!(std::max(front1_z_lo_um, front2_z_lo_um) < std::min(front1_z_hi_um, front2_z_hi_um))) {
        throw ConfigError("SteppedCrackPhantom: segment z-intervals must overlap");
    }
    if (!(density_per_um3 > 0.0)) throw ConfigError("SteppedCrackPhantom: density must be > 0");
    if (!(lambda_ligament() > 0.0) || !(far_field_stretch > 0.0)) {
        throw ConfigError("SteppedCrackPhantom: stretches must be > 0");
    }
    if (!(blend_length_um > 0.0) || !(block_decay_um > 0.0)) {
        throw ConfigError("SteppedCrackPhantom: blend and decay lengths must be > 0");
    }
    if (!(label_inset_um >= 0.0)) throw ConfigError("SteppedCrackPhantom: label inset must be >= 0");
    if (!(k_far_pa_sqrt_m >= 0.0) || !(k_bulk_pa_sqrt_m >= 0.0)) {
        throw ConfigError("SteppedCrackPhantom: opening amplitudes must be >= 0");
    }
    if (!(mu_pa > 0.0)) throw ConfigError("SteppedCrackPhantom: mu_pa must be > 0");
    if (!label_box_um().valid()) {
        throw ConfigError("SteppedCrackPhantom: label inset leaves no ligament volume");
    }
}

Aabb SteppedCrackPhantom::ligament_column_um() const {
    const double w = 0.5 * step_height_um;
    return Aabb{{std::min(front1_x_um, front2_x_um), y_mid_um - w,
                 std::max(front1_z_lo_um, front2_z_lo_um)},
                {std::max(front1_x_um, front2_x_um), y_mid_um + w,
                 std::min(front1_z_hi_um, front2_z_hi_um)}};
}

Aabb SteppedCrackPhantom::label_box_um() const {
    const Aabb col = ligament_column_um();
    const Vec3 inset{label_inset_um, label_inset_um, label_inset_um};
    return Aabb{col.lo + inset, col.hi - inset};
}

double SteppedCrackPhantom::closed_form_e_lig_j() const {
    const double lam = lambda_ligament();
    const double i1 = lam * lam + 2.0 / lam;
    const double w = 0.5 * mu_pa * (i1 - 3.0);
    const Aabb box = label_box_um();
    return w * box.volume() * 1e-18;   // um^3 -> m^3
}

Vec3 stepped_displacement_um(const SteppedCrackPhantom& p, const Vec3& X_um) {
    const double lam = p.lambda_ligament();
    const double lff = p.far_field_stretch;
    const Aabb col = p.ligament_column_um();
    const Vec3 c = col.center();
    const double w = 0.5 * p.step_height_um;

    // uniform incompressible uniaxial fields about the column center
    const Vec3 rel = X_um - c;
    const double tl = 1.0 / std::sqrt(lam) - 1.0;   // ligament transverse
    const double tf = 1.0 / std::sqrt(lff) - 1.0;   // background transverse
    const Vec3 u_bg{tf * rel.x, (lff - 1.0) * rel.y, tf * rel.z};

    // extra ligament displacement over background; hands off exponentially
    // into the blocks above/below the crack planes so the planes stay closed
    // up to the opening term
    const double dy = X_um.y - p.y_mid_um;
    const double dt = tl - tf;
    Vec3 d;
    if (std::abs(dy) <= w) {
        d = Vec3{dt * rel.x, (lam - lff) * rel.y, dt * rel.z};
    } else {
        const double e = std::exp(-(std::abs(dy) - w) / p.block_decay_um);
        d = Vec3{dt * rel.x, (lam - lff) * (dy < 0.0 ? -w : w), dt * rel.z} * e;
    }
    const double s = outside_ramp(X_um.x, col.lo.x, col.hi.x, p.blend_length_um) *
                     outside_ramp(X_um.z, col.lo.z, col.hi.z, p.blend_length_um);
    Vec3 u = u_bg + d * s;

    // small parabolic opening on the outer side of each crack plane
    if (p.k_bulk_pa_sqrt_m > 0.0) {
        const double e_eff = 3.0 * p.mu_pa;
        const auto flank = [&](double plane_y, bool outward_up, double front_x, double z_lo,
                               double z_hi) {
            const double side = X_um.y - plane_y;
            if (outward_up ? (side <= 0.0) : (side >= 0.0)) return 0.0;
            const double r_um = front_x - X_um.x;
            if (r_um <= 0.0) return 0.0;
            const double half_um =
                0.5e6 * (8.0 * p.k_bulk_pa_sqrt_m / e_eff) * std::sqrt(r_um * 1e-6 / kTwoPi);
            const double taper = inside_taper(X_um.z, z_lo, z_hi, p.blend_length_um);
            return (outward_up ? 1.0 : -1.0) * half_um * taper *
                   std::exp(-std::abs(side) / p.block_decay_um);
        };
        const double w_up = p.y_mid_um + w;
        const double w_lo = p.y_mid_um - w;
        u.y += flank(w_up, true, p.front1_x_um, p.front1_z_lo_um, p.front1_z_hi_um);
        u.y += flank(w_lo, false, p.front2_x_um, p.front2_z_lo_um, p.front2_z_hi_um);
    }
    return u;
}

SteppedCrackField gen_stepped_crack(const SteppedCrackPhantom& phantom, std::uint64_t seed) {
    phantom.validate();

    const double vol = phantom.bounds_um.volume();
    const auto n = static_cast<std::size_t>(std::llround(phantom.density_per_um3 * vol));
    if (n < 64) throw ConfigError("SteppedCrackPhantom: density yields too few particles");

    Rng rng(seed);
    const Aabb labels = phantom.label_box_um();
    std::vector<ParticleTrack> tracks;
    std::vector<std::uint8_t> lab;
    tracks.reserve(n);
    lab.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 X = uniform_in(rng, phantom.bounds_um);
        tracks.push_back(ParticleTrack{static_cast<std::int64_t>(i), X,
                                       X + stepped_displacement_um(phantom, X), 1.0});
        lab.push_back(labels.contains(X) ? 1 : 0);
    }

    SteppedCrackField out;
    out.phantom = phantom;
    out.set = build_particle_set(std::move(tracks));
    out.labels = std::move(lab);

    // analytic far-field faces of the leading front, opened by k_far
    const bool lead1 = phantom.front1_x_um >= phantom.front2_x_um;
    const double front_x = lead1 ? phantom.front1_x_um : phantom.front2_x_um;
    const double plane_y =
        phantom.y_mid_um + (lead1 ? 0.5 : -0.5) * phantom.step_height_um;
    const double z_face = lead1 ? 0.5 * (phantom.front1_z_lo_um + phantom.front1_z_hi_um)
                                : 0.5 * (phantom.front2_z_lo_um + phantom.front2_z_hi_um);
    out.tip_um = Vec3{front_x, plane_y, z_face};

    const double e_eff = 3.0 * phantom.mu_pa;
    const std::size_t n_face = 400;
    const double face_r_max_um = std::min(front_x - phantom.bounds_um.lo.x, 600.0);
    out.face_points.reserve(2 * n_face);
    for (std::size_t j = 0; j < n_face; ++j) {
        const double r_um =
            (static_cast<double>(j) + 0.5) * face_r_max_um / static_cast<double>(n_face);
        const double half_um =
            0.5e6 * (8.0 * phantom.k_far_pa_sqrt_m / e_eff) * std::sqrt(r_um * 1e-6 / kTwoPi);
        out.face_points.push_back(FacePoint{{front_x - r_um, plane_y + half_um, z_face}, true});
        out.face_points.push_back(FacePoint{{front_x - r_um, plane_y - half_um, z_face}, false});
    }
    return out;
}

} // namespace crackfield
