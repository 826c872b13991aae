#pragma once

#include <cstdint>
#include <vector>

#include "crackfield/fracture.hpp"
#include "crackfield/particles.hpp"
#include "crackfield/tensor3.hpp"

namespace crackfield {

// Uniform random reference points in bounds, x = F0 X + c. Seed-deterministic.
ParticleSet gen_affine(std::size_t n, const Aabb& bounds_um, const Mat3& f0, const Vec3& c_um,
                       std::uint64_t seed);

// ---- Williams mode-I field ----

struct LefmFieldSpec {
    double k1_pa_sqrt_m = 0.0;
    double mu_pa = 35000.0;
    double kappa = 5.0 / 3.0;      // Kolosov constant; 5/3 = incompressible plane stress
    Vec3 tip_um;                   // crack along -x from the tip, opening along y
    double r_excl_um = 20.0;       // singularity exclusion disk (in-plane radius)

    void validate() const;         // throws ConfigError
    double e_eff_pa() const { return 8.0 * mu_pa / (kappa + 1.0); }  // = 3 mu at kappa 5/3
    double g_j_m2() const { return k1_pa_sqrt_m * k1_pa_sqrt_m / e_eff_pa(); }
};

// Analytic displacement (µm) at reference position X (µm):
//   u = (K/2mu) sqrt(r/2pi) (kappa - cos th) [cos(th/2), sin(th/2), 0]
// with (r, th) polar about the tip, branch cut on the crack (th = +-pi).
Vec3 lefm_displacement_um(const LefmFieldSpec& spec, const Vec3& X_um);

// Analytic deformation gradient at X (exact derivative of the field above).
Mat3 lefm_def_grad(const LefmFieldSpec& spec, const Vec3& X_um);

// Total crack opening at distance r behind the tip: (8K/E_eff) sqrt(r/2pi), meters.
double lefm_opening_m(const LefmFieldSpec& spec, double r_m);

struct LefmField {
    ParticleSet set;
    LefmFieldSpec spec;
    std::vector<FacePoint> face_points;   // deformed crack faces, for CTOD extraction
};

// Rejection-samples n points in bounds outside the exclusion disk, displaces
// them by the analytic field, and emits analytic face points out to
// face_r_max_um behind the tip.
LefmField gen_lefm_mode1(std::size_t n, const Aabb& bounds_um, const LefmFieldSpec& spec,
                         std::uint64_t seed, std::size_t n_face_points = 400,
                         double face_r_max_um = 600.0);

// ---- stepped-crack phantom ----

// Two overlapping crack-front segments with a ligament bridge between them.
// The deformation rule is a prescribed kinematic ansatz (uniform uniaxial
// stretch in the ligament column, exponential hand-off into the blocks above
// and below, cosine x/z blending into the far field, plus a small parabolic
// opening flank on each crack plane) - a measurement-validation target, not
// solved elasticity.
struct SteppedCrackPhantom {
    Aabb bounds_um;                      // particle domain
    double step_height_um = 130.0;      // crack planes at y_mid +- step/2
    double y_mid_um = 0.0;
    double front1_x_um = 0.0;           // upper-plane segment front (leading when larger)
    double front1_z_lo_um = 0.0, front1_z_hi_um = 0.0;
    double front2_x_um = 0.0;           // lower-plane segment front
    double front2_z_lo_um = 0.0, front2_z_hi_um = 0.0;
    double density_per_um3 = 1e-3;      // particle seeding density
    double far_field_stretch = 1.1;     // lambda_ff, uniaxial along y about the domain center
    double lig_amplification = 1.0;     // lambda_lig = 1 + amp * (lambda_ff - 1)
    double blend_length_um = 60.0;      // cosine ramp outside the ligament column (x, z)
    double block_decay_um = 80.0;       // exponential hand-off above/below the crack planes
    double label_inset_um = 15.0;       // ground-truth labels shrunk from the column
    double k_far_pa_sqrt_m = 0.0;       // far-field opening amplitude (faces + CTOD truth)
    double k_bulk_pa_sqrt_m = 10.0;     // small opening carried by the particle field
    double mu_pa = 35000.0;

    void validate() const;              // throws ConfigError

    double lambda_ligament() const {
        return 1.0 + lig_amplification * (far_field_stretch - 1.0);
    }
    // ligament column: between the two fronts, inside the z-overlap
    Aabb ligament_column_um() const;
    // labeled ground-truth ligament box (column inset by label_inset_um)
    Aabb label_box_um() const;
    // closed-form E over the label box for the uniform ligament stretch
    double closed_form_e_lig_j() const;
    double gc_true_j_m2() const {
        return k_far_pa_sqrt_m * k_far_pa_sqrt_m / (3.0 * mu_pa);
    }
};

struct SteppedCrackField {
    ParticleSet set;
    SteppedCrackPhantom phantom;
    std::vector<std::uint8_t> labels;     // 1 = ligament, aligned with set order
    std::vector<FacePoint> face_points;   // leading-front faces opened by k_far
    Vec3 tip_um;                          // leading front tip for CTOD extraction
};

SteppedCrackField gen_stepped_crack(const SteppedCrackPhantom& phantom, std::uint64_t seed);

// phantom displacement at a reference point, exposed for direct field tests
Vec3 stepped_displacement_um(const SteppedCrackPhantom& phantom, const Vec3& X_um);

} // namespace crackfield
