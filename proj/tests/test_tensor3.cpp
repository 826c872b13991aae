#include <doctest.h>

#include <cmath>

#include "crackfield/errors.hpp"
#include "crackfield/rng.hpp"
#include "crackfield/tensor3.hpp"

using namespace crackfield;

namespace {

Mat3 random_rotation(Rng& rng) {
    // axis-angle with a uniformly random axis
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 6.283185307179586);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 axis{s * std::cos(phi), s * std::sin(phi), z};
    return Mat3::rotation(axis, rng.uniform(0.0, 6.283185307179586));
}

} // namespace

TEST_CASE("vec3 basics") {
    const Vec3 a{1.0, 2.0, 3.0};
    const Vec3 b{-2.0, 0.5, 4.0};
    CHECK(a.dot(b) == doctest::Approx(11.0));
    const Vec3 c = a.cross(b);
    CHECK(c.dot(a) == doctest::Approx(0.0));
    CHECK(c.dot(b) == doctest::Approx(0.0));
    CHECK(Vec3{3.0, 4.0, 0.0}.norm() == doctest::Approx(5.0));
    CHECK((a - a).norm() == 0.0);
}

TEST_CASE("mat3 determinant inverse trace") {
    const Mat3 m = Mat3::from_rows({2.0, 1.0, 0.0}, {0.0, 3.0, 4.0}, {5.0, 6.0, 1.0});
    CHECK(m.trace() == doctest::Approx(6.0));
    // cofactor expansion by hand: 2*(3-24) - 1*(0-20) + 0 = -22
    CHECK(m.det() == doctest::Approx(-22.0));
    const Mat3 prod = m * m.inverse();
    CHECK(prod.max_abs_diff(Mat3::identity()) < 1e-12);
}

TEST_CASE("mat3 inverse rejects singular") {
    const Mat3 m = Mat3::from_rows({1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}, {0.0, 1.0, 1.0});
    CHECK_THROWS_AS((void)m.inverse(), ConditioningError);
}

TEST_CASE("rotation matrices are orthonormal and right-handed") {
    Rng rng(42);
    for (int t = 0; t < 100; ++t) {
        const Mat3 r = random_rotation(rng);
        CHECK((r.transposed() * r).max_abs_diff(Mat3::identity()) < 1e-13);
        CHECK(r.det() == doctest::Approx(1.0).epsilon(1e-12));
    }
    // quarter turn about z maps x to y
    const Mat3 qz = Mat3::rotation({0.0, 0.0, 1.0}, 1.5707963267948966);
    const Vec3 y = qz * Vec3{1.0, 0.0, 0.0};
    CHECK(y.x == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(y.y == doctest::Approx(1.0));
}

TEST_CASE("eig_sym3 diagonal with permuted entries") {
    const auto e = eig_sym3(Mat3::diag(1.0, 3.0, 2.0));
    CHECK(e.values[0] == doctest::Approx(3.0));
    CHECK(e.values[1] == doctest::Approx(2.0));
    CHECK(e.values[2] == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors[0].y) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors[1].z) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors[2].x) == doctest::Approx(1.0));
    // sign convention: first sizable component positive
    CHECK(e.vectors[0].y > 0.0);
    CHECK(e.vectors[1].z > 0.0);
    CHECK(e.vectors[2].x > 0.0);
}

TEST_CASE("eig_sym3 reconstructs random symmetric matrices") {
    Rng rng(7);
    for (int t = 0; t < 200; ++t) {
        const Mat3 q = random_rotation(rng);
        const Mat3 m = q * Mat3::diag(rng.uniform(0.1, 10.0), rng.uniform(0.1, 10.0),
                                      rng.uniform(0.1, 10.0)) *
                       q.transposed();
        const auto e = eig_sym3(m);
        CHECK(e.values[0] >= e.values[1]);
        CHECK(e.values[1] >= e.values[2]);
        CHECK(e.reconstruct().max_abs_diff(m) < 1e-9 * std::max(1.0, m.max_abs()));
        const Mat3 v = e.vector_matrix();
        CHECK((v.transposed() * v).max_abs_diff(Mat3::identity()) < 1e-10);
    }
}

TEST_CASE("eig_sym3 handles repeated eigenvalues") {
    const auto iso = eig_sym3(Mat3::diag(2.0, 2.0, 2.0));
    for (const double v : iso.values) CHECK(v == doctest::Approx(2.0));
    const Mat3 vm = iso.vector_matrix();
    CHECK((vm.transposed() * vm).max_abs_diff(Mat3::identity()) < 1e-12);

    // two equal, one distinct, in a rotated frame
    Rng rng(19);
    const Mat3 q = random_rotation(rng);
    const Mat3 m = q * Mat3::diag(5.0, 1.0, 1.0) * q.transposed();
    const auto e = eig_sym3(m);
    CHECK(e.values[0] == doctest::Approx(5.0));
    CHECK(e.values[1] == doctest::Approx(1.0));
    CHECK(e.values[2] == doctest::Approx(1.0));
    CHECK(e.reconstruct().max_abs_diff(m) < 1e-10);
}

TEST_CASE("eig_sym3 rejects asymmetric and non-finite input") {
    Mat3 m = Mat3::diag(1.0, 2.0, 3.0);
    m(0, 1) = 1e-6;   // asymmetry far beyond the 1e-9 gate
    CHECK_THROWS_AS((void)eig_sym3(m), InvalidInputError);
    Mat3 bad = Mat3::identity();
    bad(2, 2) = std::nan("");
    CHECK_THROWS_AS((void)eig_sym3(bad), InvalidInputError);
}

TEST_CASE("polar decomposition of a hand-built F = R U") {
    const Mat3 r0 = Mat3::rotation({0.0, 0.0, 1.0}, 0.7);
    const Mat3 u0 = Mat3::diag(2.0, 1.0, 0.5);
    const auto pf = polar_decompose(r0 * u0);
    CHECK(pf.R.max_abs_diff(r0) < 1e-12);
    CHECK(pf.U.max_abs_diff(u0) < 1e-12);
    CHECK((pf.R * pf.U).max_abs_diff(r0 * u0) < 1e-12);
    CHECK((pf.V * pf.R).max_abs_diff(r0 * u0) < 1e-12);
}

TEST_CASE("polar invariants over random well-conditioned F") {
    Rng rng(2024);
    int accepted = 0;
    while (accepted < 500) {
        Mat3 f;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) f(r, c) = rng.uniform(-1.5, 1.5);
        }
        const double d = f.det();
        if (d <= 0.1 || d >= 10.0) continue;
        ++accepted;
        const auto pf = polar_decompose(f);
        const double scale = std::max(1.0, f.max_abs());
        CHECK((pf.R.transposed() * pf.R).max_abs_diff(Mat3::identity()) < 1e-10);
        CHECK(pf.R.det() > 0.0);
        CHECK(pf.U.max_asymmetry() < 1e-9);
        CHECK(pf.V.max_asymmetry() < 1e-9);
        CHECK((pf.R * pf.U).max_abs_diff(f) < 1e-9 * scale);
        CHECK((pf.V * pf.R).max_abs_diff(f) < 1e-9 * scale);
        // U and V share eigenvalues with sqrt(C)
        const auto eu = eig_sym3(pf.U);
        for (const double lam : eu.values) CHECK(lam > 0.0);
    }
}

TEST_CASE("polar decomposition error paths") {
    CHECK_THROWS_AS((void)polar_decompose(Mat3::diag(1.0, 1.0, -1.0)), InvertedElementError);
    CHECK_THROWS_AS((void)polar_decompose(Mat3::zero()), InvertedElementError);
    // det > 0 but one stretch collapses under the 1e-8 floor
    CHECK_THROWS_AS((void)polar_decompose(Mat3::diag(1e-12, 1.0, 1.0)), ConditioningError);
}

TEST_CASE("invariants of a stretch tensor") {
    // B for uniaxial lambda=2 incompressible: diag(4, 1/4, 1) has I1 = 5.25
    const auto inv = invariants3(Mat3::diag(4.0, 0.25, 1.0));
    CHECK(inv.i1 == doctest::Approx(5.25).epsilon(1e-14));
    CHECK(inv.i3 == doctest::Approx(1.0).epsilon(1e-14));
    // I2 = sum of pairwise products
    CHECK(inv.i2 == doctest::Approx(4.0 * 0.25 + 4.0 * 1.0 + 0.25 * 1.0).epsilon(1e-14));
}

TEST_CASE("aabb shrink and containment") {
    const Aabb box{{0.0, 0.0, 0.0}, {10.0, 20.0, 30.0}};
    CHECK(box.volume() == doctest::Approx(6000.0));
    const Aabb inner = box.shrunk(0.1);
    CHECK(inner.lo.x == doctest::Approx(1.0));
    CHECK(inner.hi.y == doctest::Approx(18.0));
    CHECK(inner.contains({5.0, 10.0, 15.0}));
    CHECK(!inner.contains({0.5, 10.0, 15.0}));
}
