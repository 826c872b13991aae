#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "crackfield/errors.hpp"
#include "crackfield/fracture.hpp"
#include "crackfield/rng.hpp"

using namespace crackfield;

namespace {

constexpr double kPi = 3.14159265358979323846;

// delta(r) = C sqrt(r + r0) with C in sqrt(m), r in um, result in um
CtodProfile parabolic_profile(double g_j_m2, double mu_pa, double r0_um, int n,
                              double r_lo_um, double r_hi_um) {
    const double e_eff = 3.0 * mu_pa;
    const double c = std::sqrt(32.0 * g_j_m2 / (kPi * e_eff));
    CtodProfile p;
    for (int i = 0; i < n; ++i) {
        const double r = r_lo_um + (r_hi_um - r_lo_um) * i / (n - 1);
        const double delta_um = 1e6 * c * std::sqrt((r + r0_um) * 1e-6);
        p.samples.push_back({r, delta_um});
    }
    return p;
}

} // namespace

TEST_CASE("noiseless parabolic profiles round trip in G") {
    const MaterialModel mat;   // 35 kPa
    for (const double g : {1.0, 10.0, 50.0}) {
        const CtodProfile p = parabolic_profile(g, mat.mu_pa, 0.0, 60, 20.0, 600.0);
        const FractureFit fit = fit_ctod(p, mat, 20.0, 600.0);
        CHECK(std::abs(fit.gc_j_m2 - g) < 1e-9 * g);
        CHECK(std::abs(fit.r_tip_offset_um) < 1e-6);
        CHECK(fit.e_eff_pa == doctest::Approx(105000.0));
        // K consistency: K^2 = G E'
        CHECK(fit.k1_pa_sqrt_m * fit.k1_pa_sqrt_m ==
              doctest::Approx(g * 105000.0).epsilon(1e-9));
        CHECK(fit.fit_rms_um < 1e-6);
        CHECK(fit.n_samples_used == 60);
    }
}

TEST_CASE("tip offset is recovered") {
    const MaterialModel mat;
    const CtodProfile p = parabolic_profile(10.0, mat.mu_pa, 25.0, 80, 50.0, 500.0);
    const FractureFit fit = fit_ctod(p, mat, 50.0, 500.0);
    CHECK(fit.r_tip_offset_um == doctest::Approx(25.0).epsilon(1e-6));
    CHECK(fit.gc_j_m2 == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("multiplicative noise degrades G gracefully") {
    const MaterialModel mat;
    Rng rng(555);
    std::vector<double> errs;
    for (int seed = 0; seed < 40; ++seed) {
        CtodProfile p = parabolic_profile(10.0, mat.mu_pa, 0.0, 60, 50.0, 500.0);
        for (auto& s : p.samples) s.delta_um *= 1.0 + 0.02 * rng.normal();
        const FractureFit fit = fit_ctod(p, mat, 50.0, 500.0);
        errs.push_back(std::abs(fit.gc_j_m2 - 10.0) / 10.0);
    }
    std::sort(errs.begin(), errs.end());
    CHECK(errs[errs.size() / 2] < 0.02);   // median within 2%
}

TEST_CASE("window filtering and failure modes") {
    const MaterialModel mat;
    const CtodProfile p = parabolic_profile(10.0, mat.mu_pa, 0.0, 60, 20.0, 600.0);

    // narrow window keeps only its own samples
    const FractureFit fit = fit_ctod(p, mat, 100.0, 300.0);
    CHECK(fit.n_samples_used < 60);
    CHECK(fit.gc_j_m2 == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(fit.r_min_um == 100.0);
    CHECK(fit.r_max_um == 300.0);

    // window with too few points
    CHECK_THROWS_AS((void)fit_ctod(p, mat, 598.0, 600.0), FitError);
    // inverted window is a configuration mistake, not a data problem
    CHECK_THROWS_AS((void)fit_ctod(p, mat, 300.0, 100.0), ConfigError);

    // all-zero opening is a legitimate zero fit, not an error
    CtodProfile closed;
    for (int i = 0; i < 20; ++i) closed.samples.push_back({50.0 + 10.0 * i, 0.0});
    const FractureFit zero = fit_ctod(closed, mat, 0.0, 1000.0);
    CHECK(zero.gc_j_m2 == 0.0);
    CHECK(zero.c_sqrt_m == 0.0);
    CHECK(zero.k1_pa_sqrt_m == 0.0);

    // opening shrinking with r: negative slope, no parabola
    CtodProfile shrink;
    for (int i = 0; i < 20; ++i) {
        shrink.samples.push_back({50.0 + 10.0 * i, 10.0 - 0.45 * i});
    }
    CHECK_THROWS_AS((void)fit_ctod(shrink, mat, 0.0, 1000.0), FitError);

    // degenerate abscissa
    CtodProfile samer;
    for (int i = 0; i < 20; ++i) samer.samples.push_back({100.0, 5.0});
    CHECK_THROWS_AS((void)fit_ctod(samer, mat, 0.0, 1000.0), FitError);
}

TEST_CASE("face points bin into a ctod profile") {
    const MaterialModel mat;
    const double e_eff = 3.0 * mat.mu_pa;
    const double c = std::sqrt(32.0 * 10.0 / (kPi * e_eff));
    const Vec3 tip{500.0, 0.0, 25.0};
    std::vector<FacePoint> pts;
    Rng rng(9);
    for (int i = 0; i < 4000; ++i) {
        const double r = rng.uniform(1.0, 450.0);
        const double half_um = 0.5e6 * c * std::sqrt(r * 1e-6);
        const double z = rng.uniform(0.0, 50.0);
        pts.push_back({{tip.x - r, half_um, z}, true});
        pts.push_back({{tip.x - r, -half_um, z}, false});
    }
    const CtodProfile prof = extract_ctod_from_surface(pts, tip, 10.0);
    CHECK(prof.samples.size() >= 40);
    const FractureFit fit = fit_ctod(prof, mat, 50.0, 450.0);
    // binning smears sqrt(r) slightly; a fraction of a percent is expected
    CHECK(fit.gc_j_m2 == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("face extraction needs both faces") {
    std::vector<FacePoint> upper_only;
    for (int i = 0; i < 100; ++i) {
        upper_only.push_back({{static_cast<double>(i), 1.0, 0.0}, true});
    }
    CHECK_THROWS_AS((void)extract_ctod_from_surface(upper_only, {200.0, 0.0, 0.0}, 10.0),
                    InvalidInputError);
}

TEST_CASE("regression on exactly colinear points reproduces the line") {
    // the published calibration: G_c = 3.84e7 * E_lig + 4.36
    const double slope = 3.84e7;
    const double intercept = 4.36;
    std::vector<RegressionPoint> pts;
    for (const double e : {0.0, 0.5e-7, 1.0e-7, 1.5e-7, 2.0e-7}) {
        pts.push_back({e, slope * e + intercept});
    }
    const RegressionResult r = regress_gc_vs_elig(pts);
    CHECK(std::abs(r.slope_per_m2 - slope) <= 1e-9 * slope);
    CHECK(std::abs(r.intercept_j_m2 - intercept) <= 1e-9 * intercept);
    CHECK(r.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.n_points == 5);
    for (const double res : r.residuals_j_m2) CHECK(std::abs(res) < 1e-9);
    // spot value on the line: E = 1e-7 J maps to 8.2 J/m^2
    CHECK(slope * 1.0e-7 + intercept == doctest::Approx(8.2).epsilon(1e-12));
}

TEST_CASE("regression error paths") {
    CHECK_THROWS_AS((void)regress_gc_vs_elig({}), InvalidInputError);
    CHECK_THROWS_AS((void)regress_gc_vs_elig({{1e-7, 5.0}}), InvalidInputError);
    std::vector<RegressionPoint> same_x = {{1e-7, 5.0}, {1e-7, 6.0}, {1e-7, 7.0}};
    CHECK_THROWS_AS((void)regress_gc_vs_elig(same_x), FitError);
}

TEST_CASE("regression with scatter reports residuals") {
    Rng rng(77);
    std::vector<RegressionPoint> pts;
    for (int i = 0; i < 30; ++i) {
        const double e = 1e-8 * i;
        pts.push_back({e, 3.84e7 * e + 4.36 + 0.1 * rng.normal()});
    }
    const RegressionResult r = regress_gc_vs_elig(pts);
    CHECK(r.slope_per_m2 == doctest::Approx(3.84e7).epsilon(0.05));
    CHECK(r.intercept_j_m2 == doctest::Approx(4.36).epsilon(0.05));
    CHECK(r.r_squared > 0.95);
    CHECK(r.residuals_j_m2.size() == 30);
}
