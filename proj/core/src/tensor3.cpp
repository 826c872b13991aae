#include "crackfield/tensor3.hpp"

#include <algorithm>
#include <cmath>

#include "crackfield/errors.hpp"

namespace crackfield {

Mat3 Mat3::rotation(const Vec3& axis, double angle_rad) {
    const Vec3 n = axis.normalized();
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    Mat3 k;                       // skew(n)
    k(0, 1) = -n.z; k(0, 2) = n.y;
    k(1, 0) = n.z;  k(1, 2) = -n.x;
    k(2, 0) = -n.y; k(2, 1) = n.x;
    return Mat3::identity() + k * s + (k * k) * (1.0 - c);
}

Mat3 Mat3::inverse() const {
    const double d = det();
    const double scale = max_abs();
    if (!(std::abs(d) > 1e-300) || std::abs(d) < 1e-14 * scale * scale * scale) {
        throw ConditioningError("Mat3::inverse: matrix is singular to working precision");
    }
    Mat3 inv;
    inv(0, 0) = a[4] * a[8] - a[5] * a[7];
    inv(0, 1) = a[2] * a[7] - a[1] * a[8];
    inv(0, 2) = a[1] * a[5] - a[2] * a[4];
    inv(1, 0) = a[5] * a[6] - a[3] * a[8];
    inv(1, 1) = a[0] * a[8] - a[2] * a[6];
    inv(1, 2) = a[2] * a[3] - a[0] * a[5];
    inv(2, 0) = a[3] * a[7] - a[4] * a[6];
    inv(2, 1) = a[1] * a[6] - a[0] * a[7];
    inv(2, 2) = a[0] * a[4] - a[1] * a[3];
    return inv * (1.0 / d);
}

Mat3 EigenSym3::reconstruct() const {
    Mat3 m;
    for (int i = 0; i < 3; ++i) m += Mat3::outer(vectors[i], vectors[i]) * values[i];
    return m;
}

namespace {

// One Givens rotation zeroing A(p,q); A stays symmetric, Q accumulates
// eigenvectors in its columns.
void jacobi_rotate(Mat3& a, Mat3& q, int p, int r) {
    const double apq = a(p, r);
    if (apq == 0.0) return;
    const double theta = (a(r, r) - a(p, p)) / (2.0 * apq);
    double t;
    if (std::abs(theta) > 1e154) {
        t = 1.0 / (2.0 * theta);    // avoid overflow in theta^2
    } else {
        t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
    }
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;
    const double tau = s / (1.0 + c);

    const double app = a(p, p), arr = a(r, r);
    a(p, p) = app - t * apq;
    a(r, r) = arr + t * apq;
    a(p, r) = 0.0;
    a(r, p) = 0.0;
    for (int k = 0; k < 3; ++k) {
        if (k == p || k == r) continue;
        const double akp = a(k, p), akr = a(k, r);
        a(k, p) = akp - s * (akr + tau * akp);
        a(p, k) = a(k, p);
        a(k, r) = akr + s * (akp - tau * akr);
        a(r, k) = a(k, r);
    }
    for (int k = 0; k < 3; ++k) {
        const double qkp = q(k, p), qkr = q(k, r);
        q(k, p) = qkp - s * (qkr + tau * qkp);
        q(k, r) = qkr + s * (qkp - tau * qkr);
    }
}

double offdiag_norm2(const Mat3& a) {
    return a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
}

void apply_sign_convention(Vec3& v) {
    for (int i = 0; i < 3; ++i) {
        if (std::abs(v[i]) > tol::kEigvecSignEps) {
            if (v[i] < 0.0) v = -v;
            return;
        }
    }
}

} // namespace

EigenSym3 eig_sym3(const Mat3& m) {
    if (!m.finite()) throw InvalidInputError("eig_sym3: non-finite matrix entry");
    const double scale = std::max(1.0, m.max_abs());
    if (m.max_asymmetry() > tol::kSymmetryCheckAbs * scale) {
        throw InvalidInputError("eig_sym3: matrix asymmetry exceeds 1e-9");
    }

    Mat3 a = (m + m.transposed()) * 0.5;
    Mat3 q = Mat3::identity();

    const double fro2 = [&] {
        double s = 0.0;
        for (double v : a.a) s += v * v;
        return s;
    }();
    const double stop = std::max(1e-300, 1e-30 * fro2);
    for (int sweep = 0; sweep < 50 && offdiag_norm2(a) > stop; ++sweep) {
        jacobi_rotate(a, q, 0, 1);
        jacobi_rotate(a, q, 0, 2);
        jacobi_rotate(a, q, 1, 2);
    }

    std::array<int, 3> order = {0, 1, 2};
    std::array<double, 3> diag = {a(0, 0), a(1, 1), a(2, 2)};
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return diag[i] > diag[j]; });

    EigenSym3 out;
    for (int i = 0; i < 3; ++i) {
        out.values[i] = diag[order[i]];
        out.vectors[i] = q.col(order[i]);
    }
    // Gram-Schmidt in sorted order; Jacobi leaves the columns orthonormal to
    // machine precision, this pins down near-degenerate pairs.
    out.vectors[0] = out.vectors[0].normalized();
    out.vectors[1] = (out.vectors[1] - out.vectors[0] * out.vectors[1].dot(out.vectors[0])).normalized();
    out.vectors[2] = out.vectors[0].cross(out.vectors[1]).normalized();
    if (out.vectors[2].dot(q.col(order[2])) < 0.0) out.vectors[2] = -out.vectors[2];
    for (Vec3& v : out.vectors) apply_sign_convention(v);
    return out;
}

PolarFactors polar_decompose(const Mat3& f) {
    if (!f.finite()) throw InvalidInputError("polar_decompose: non-finite matrix entry");
    const double d = f.det();
    if (!(d > 0.0)) {
        throw InvertedElementError("polar_decompose: det F <= 0 (inadmissible local motion)");
    }

    const Mat3 c = f.transposed() * f;   // right Cauchy-Green, symmetric by construction
    const EigenSym3 ec = eig_sym3(c);

    std::array<double, 3> lam;
    for (int i = 0; i < 3; ++i) lam[i] = std::sqrt(std::max(ec.values[i], 0.0));
    if (lam[2] < tol::kMinStretch) {
        throw ConditioningError("polar_decompose: smallest stretch below 1e-8");
    }

    Mat3 u, uinv;
    for (int i = 0; i < 3; ++i) {
        const Mat3 p = Mat3::outer(ec.vectors[i], ec.vectors[i]);
        u += p * lam[i];
        uinv += p * (1.0 / lam[i]);
    }

    PolarFactors out;
    out.U = u;
    out.R = f * uinv;
    out.V = out.R * u * out.R.transposed();
    return out;
}

Invariants3 invariants3(const Mat3& m) {
    if (!m.finite()) throw InvalidInputError("invariants3: non-finite matrix entry");
    const double i1 = m.trace();
    const double tr_m2 = (m * m).trace();
    return {i1, 0.5 * (i1 * i1 - tr_m2), m.det()};
}

} // namespace crackfield
