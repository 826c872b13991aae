#pragma once

#include <array>
#include <cmath>

namespace crackfield {

// Fixed numeric tolerances of the 3x3 kernel. Downstream modules and tests
// depend on these exact values; they are deliberately not configurable.
namespace tol {
inline constexpr double kSymmetryCheckAbs = 1e-9;   // allowed |M - M^T| on eig input
inline constexpr double kOrthogonality = 1e-10;     // |Q^T Q - I| bound
inline constexpr double kReconstructRel = 1e-9;     // |Q L Q^T - M| / |M| bound
inline constexpr double kPolarRel = 1e-9;           // |RU - F| / |F| bound
inline constexpr double kMinStretch = 1e-8;         // smallest admissible stretch
inline constexpr double kEigvecSignEps = 1e-12;     // "first nonzero component" cutoff
inline constexpr double kUnitVector = 1e-12;        // | |v| - 1 | for direction vectors
} // namespace tol

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const { return *this / norm(); }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// 3x3 matrix, row-major.
struct Mat3 {
    std::array<double, 9> a{};

    double& operator()(int r, int c) { return a[r * 3 + c]; }
    double operator()(int r, int c) const { return a[r * 3 + c]; }

    static Mat3 zero() { return {}; }
    static Mat3 identity() { return diag(1.0, 1.0, 1.0); }
    static Mat3 diag(double d0, double d1, double d2) {
        Mat3 m;
        m(0, 0) = d0; m(1, 1) = d1; m(2, 2) = d2;
        return m;
    }
    /// a b^T
    static Mat3 outer(const Vec3& u, const Vec3& v) {
        Mat3 m;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) m(r, c) = u[r] * v[c];
        return m;
    }
    static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
        Mat3 m;
        for (int c = 0; c < 3; ++c) { m(0, c) = r0[c]; m(1, c) = r1[c]; m(2, c) = r2[c]; }
        return m;
    }
    static Mat3 from_cols(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
        Mat3 m;
        for (int r = 0; r < 3; ++r) { m(r, 0) = c0[r]; m(r, 1) = c1[r]; m(r, 2) = c2[r]; }
        return m;
    }
    /// Proper rotation by `angle_rad` about unit axis (Rodrigues).
    static Mat3 rotation(const Vec3& axis, double angle_rad);

    Vec3 row(int r) const { return {(*this)(r, 0), (*this)(r, 1), (*this)(r, 2)}; }
    Vec3 col(int c) const { return {(*this)(0, c), (*this)(1, c), (*this)(2, c)}; }

    Mat3 operator+(const Mat3& o) const {
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.a[i] = a[i] + o.a[i];
        return m;
    }
    Mat3 operator-(const Mat3& o) const {
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.a[i] = a[i] - o.a[i];
        return m;
    }
    Mat3 operator*(double s) const {
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.a[i] = a[i] * s;
        return m;
    }
    Mat3& operator+=(const Mat3& o) {
        for (int i = 0; i < 9; ++i) a[i] += o.a[i];
        return *this;
    }
    Vec3 operator*(const Vec3& v) const {
        return {row(0).dot(v), row(1).dot(v), row(2).dot(v)};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 m;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                m(r, c) = (*this)(r, 0) * o(0, c) + (*this)(r, 1) * o(1, c) +
                          (*this)(r, 2) * o(2, c);
        return m;
    }

    Mat3 transposed() const {
        Mat3 m;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) m(r, c) = (*this)(c, r);
        return m;
    }
    double trace() const { return a[0] + a[4] + a[8]; }
    double det() const {
        return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
               a[2] * (a[3] * a[7] - a[4] * a[6]);
    }
    /// Inverse via adjugate; throws ConditioningError when |det| is tiny.
    Mat3 inverse() const;

    double max_abs() const {
        double m = 0.0;
        for (double v : a) m = std::max(m, std::abs(v));
        return m;
    }
    double max_abs_diff(const Mat3& o) const {
        double m = 0.0;
        for (int i = 0; i < 9; ++i) m = std::max(m, std::abs(a[i] - o.a[i]));
        return m;
    }
    double max_asymmetry() const {
        double m = 0.0;
        for (int r = 0; r < 3; ++r)
            for (int c = r + 1; c < 3; ++c)
                m = std::max(m, std::abs((*this)(r, c) - (*this)(c, r)));
        return m;
    }
    bool finite() const {
        for (double v : a)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline Mat3 operator*(double s, const Mat3& m) { return m * s; }

/// Eigendecomposition of a symmetric 3x3 matrix. Eigenvalues sorted
/// descending; eigenvectors orthonormal, each with its first component of
/// magnitude > 1e-12 made positive so results are bitwise reproducible.
struct EigenSym3 {
    std::array<double, 3> values{};
    std::array<Vec3, 3> vectors{};

    Mat3 vector_matrix() const { return Mat3::from_cols(vectors[0], vectors[1], vectors[2]); }
    /// Q L Q^T
    Mat3 reconstruct() const;
};

/// F = R U = V R with R a proper rotation and U, V symmetric positive-definite.
struct PolarFactors {
    Mat3 R, U, V;
};

struct Invariants3 {
    double i1, i2, i3;
};

/// Cyclic Jacobi diagonalization. Input is symmetrized as (M + M^T)/2;
/// asymmetry beyond tol::kSymmetryCheckAbs (scaled) or non-finite entries are
/// rejected.
EigenSym3 eig_sym3(const Mat3& m);

/// Polar decomposition via the spectral square root of F^T F.
/// Throws InvertedElementError for det F <= 0 and ConditioningError when the
/// smallest stretch falls below tol::kMinStretch.
PolarFactors polar_decompose(const Mat3& f);

/// I1 = tr M, I2 = (tr(M)^2 - tr(M^2))/2, I3 = det M.
Invariants3 invariants3(const Mat3& m);

/// Axis-aligned box, used for particle bounds and region geometry.
struct Aabb {
    Vec3 lo, hi;

    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }
    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    double volume() const {
        Vec3 e = extent();
        return e.x * e.y * e.z;
    }
    bool valid() const { return lo.finite() && hi.finite() && hi.x >= lo.x && hi.y >= lo.y && hi.z >= lo.z; }
    /// Shrink by the given fraction of the extent on every side.
    Aabb shrunk(double fraction_per_side) const {
        Vec3 m = extent() * fraction_per_side;
        return {lo + m, hi - m};
    }
};

} // namespace crackfield
