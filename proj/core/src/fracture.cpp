#include "crackfield/fracture.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "crackfield/errors.hpp"

namespace crackfield {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2Pi = 2.50662827463100050242;

// centered ordinary least squares y = a x + b; returns false when all x tie
bool linear_fit(const std::vector<double>& x, const std::vector<double>& y, double& a,
                double& b) {
    const auto n = static_cast<double>(x.size());
    double xm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xm += x[i];
        ym += y[i];
    }
    xm /= n;
    ym /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - xm;
        sxx += dx * dx;
        sxy += dx * (y[i] - ym);
    }
    if (!(sxx > 0.0)) return false;
    a = sxy / sxx;
    b = ym - a * xm;
    return true;
}
} // namespace

FractureFit fit_ctod(const CtodProfile& profile, const MaterialModel& mat, double r_min_um,
                     double r_max_um) {
    mat.validate();
    if (!(r_min_um >= 0.0) || !(r_max_um > r_min_um)) {
        throw ConfigError("fit_ctod: fit window must satisfy 0 <= r_min < r_max");
    }

    std::vector<double> r, d2, d;
    for (const CtodSample& s : profile.samples) {
        if (!(s.r_um >= 0.0) || !(s.delta_um >= 0.0) || !std::isfinite(s.r_um) ||
            !std::isfinite(s.delta_um)) {
            throw InvalidInputError("fit_ctod: profile samples must be finite and nonnegative");
        }
        if (s.r_um < r_min_um || s.r_um > r_max_um) continue;
        r.push_back(s.r_um);
        d.push_back(s.delta_um);
        d2.push_back(s.delta_um * s.delta_um);
    }
    if (r.size() < 8) {
        throw FitError("fit_ctod: fewer than 8 profile samples inside [" +
                       std::to_string(r_min_um) + ", " + std::to_string(r_max_um) + "] um (" +
                       std::to_string(r.size()) + " available)");
    }

    FractureFit fit;
    fit.e_eff_pa = 3.0 * mat.mu_pa;
    fit.r_min_um = r_min_um;
    fit.r_max_um = r_max_um;
    fit.n_samples_used = r.size();

    const double delta_max = *std::max_element(d.begin(), d.end());
    double a = 0.0, b = 0.0;
    if (!linear_fit(r, d2, a, b)) {
        throw FitError("fit_ctod: all samples at one r, parabola underdetermined");
    }
    if (delta_max == 0.0) {
        // closed crack: the zero fit is exact and physical
        return fit;
    }
    if (!(a > 0.0)) {
        throw FitError("fit_ctod: fitted C^2 is non-positive (opening does not grow with r)");
    }

    // delta_um^2 = a r_um + b  ->  delta_m = sqrt(a*1e-6) * sqrt(r_m + b/a*1e-6)
    fit.c_sqrt_m = std::sqrt(a * 1e-6);
    fit.r_tip_offset_um = b / a;
    fit.k1_pa_sqrt_m = fit.c_sqrt_m * fit.e_eff_pa * kSqrt2Pi / 8.0;
    fit.gc_j_m2 = kPi * fit.c_sqrt_m * fit.c_sqrt_m * fit.e_eff_pa / 32.0;

    double ss = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double pred2 = a * r[i] + b;
        const double pred = pred2 > 0.0 ? std::sqrt(pred2) : 0.0;
        ss += (pred - d[i]) * (pred - d[i]);
    }
    fit.fit_rms_um = std::sqrt(ss / static_cast<double>(r.size()));
    return fit;
}

CtodProfile extract_ctod_from_surface(const std::vector<FacePoint>& points, const Vec3& tip_um,
                                      double bin_width_um) {
    if (!tip_um.finite()) throw InvalidInputError("extract_ctod_from_surface: non-finite tip");
    if (!(bin_width_um > 0.0)) {
        throw ConfigError("extract_ctod_from_surface: bin width must be > 0");
    }

    bool have_upper = false, have_lower = false;
    for (const FacePoint& p : points) (p.upper ? have_upper : have_lower) = true;
    if (!have_upper || !have_lower) {
        throw InvalidInputError("extract_ctod_from_surface: need points on both crack faces");
    }

    struct Bin {
        double sum_up = 0.0, sum_lo = 0.0;
        std::size_t n_up = 0, n_lo = 0;
    };
    std::map<long, Bin> bins;   // ordered so the profile comes out monotone in r
    for (const FacePoint& p : points) {
        const double r = tip_um.x - p.p_um.x;   // distance behind tip, propagation +x
        if (r < 0.0) continue;
        Bin& bin = bins[static_cast<long>(std::floor(r / bin_width_um))];
        if (p.upper) {
            bin.sum_up += p.p_um.y;
            ++bin.n_up;
        } else {
            bin.sum_lo += p.p_um.y;
            ++bin.n_lo;
        }
    }

    CtodProfile profile;
    for (const auto& [idx, bin] : bins) {
        if (bin.n_up == 0 || bin.n_lo == 0) continue;
        const double delta = bin.sum_up / static_cast<double>(bin.n_up) -
                             bin.sum_lo / static_cast<double>(bin.n_lo);
        profile.samples.push_back(
            CtodSample{(static_cast<double>(idx) + 0.5) * bin_width_um, std::max(delta, 0.0)});
    }
    if (profile.samples.size() < 8) {
        throw FitError("extract_ctod_from_surface: fewer than 8 bins with both faces (" +
                       std::to_string(profile.samples.size()) + ")");
    }
    return profile;
}

RegressionResult regress_gc_vs_elig(const std::vector<RegressionPoint>& points) {
    if (points.size() < 2) {
        throw InvalidInputError("regress_gc_vs_elig: need at least 2 points");
    }
    std::vector<double> x, y;
    x.reserve(points.size());
    y.reserve(points.size());
    for (const RegressionPoint& p : points) {
        if (!std::isfinite(p.e_lig_j) || !std::isfinite(p.gc_j_m2)) {
            throw InvalidInputError("regress_gc_vs_elig: non-finite point");
        }
        x.push_back(p.e_lig_j);
        y.push_back(p.gc_j_m2);
    }

    RegressionResult res;
    res.n_points = points.size();
    if (!linear_fit(x, y, res.slope_per_m2, res.intercept_j_m2)) {
        throw FitError("regress_gc_vs_elig: all E_lig values identical, line underdetermined");
    }

    double ym = 0.0;
    for (const double v : y) ym += v;
    ym /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    res.residuals_j_m2.reserve(points.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double fitv = res.slope_per_m2 * x[i] + res.intercept_j_m2;
        const double e = y[i] - fitv;
        res.residuals_j_m2.push_back(e);
        ss_res += e * e;
        ss_tot += (y[i] - ym) * (y[i] - ym);
    }
    res.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    return res;
}

} // namespace crackfield
