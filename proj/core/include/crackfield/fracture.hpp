#pragma once

#include <string>
#include <vector>

#include "crackfield/constitutive.hpp"
#include "crackfield/tensor3.hpp"

namespace crackfield {

struct CtodSample {
    double r_um = 0.0;       // distance behind the effective tip
    double delta_um = 0.0;   // total opening
};

struct CtodProfile {
    std::vector<CtodSample> samples;
    std::string label;       // loading-increment tag
};

struct FractureFit {
    double c_sqrt_m = 0.0;         // delta = C * sqrt(r + offset), SI units
    double r_tip_offset_um = 0.0;  // fitted effective tip shift
    double k1_pa_sqrt_m = 0.0;
    double gc_j_m2 = 0.0;
    double e_eff_pa = 0.0;         // 3 mu (incompressible plane stress)
    double fit_rms_um = 0.0;       // rms of delta misfit over the window
    double r_min_um = 0.0;         // window actually used
    double r_max_um = 0.0;
    std::size_t n_samples_used = 0;
};

// Least-squares delta^2 = C^2 (r + r_tip_offset) over [r_min, r_max], then
// the plane-stress conversion K_I = C E_eff sqrt(2 pi)/8 and
// G_c = pi C^2 E_eff / 32 with E_eff = 3 mu. An all-zero opening yields the
// zero fit; a negative fitted C^2 on nonzero data throws FitError.
FractureFit fit_ctod(const CtodProfile& profile, const MaterialModel& mat,
                     double r_min_um, double r_max_um);

struct FacePoint {
    Vec3 p_um;           // deformed-frame position
    bool upper = true;   // which crack face
};

// Bins face points by distance behind the tip along -x (propagation along
// +x), opening = mean upper y - mean lower y per bin. Bins with only one
// face present are skipped; needs both faces overall and >= 8 usable bins.
CtodProfile extract_ctod_from_surface(const std::vector<FacePoint>& points,
                                      const Vec3& tip_um, double bin_width_um = 10.0);

struct RegressionPoint {
    double e_lig_j = 0.0;
    double gc_j_m2 = 0.0;
};

struct RegressionResult {
    double slope_per_m2 = 0.0;
    double intercept_j_m2 = 0.0;
    double r_squared = 1.0;
    std::size_t n_points = 0;
    std::vector<double> residuals_j_m2;   // observed - fitted, input order
};

// Ordinary least squares G_c = slope * E_lig + intercept.
RegressionResult regress_gc_vs_elig(const std::vector<RegressionPoint>& points);

} // namespace crackfield
