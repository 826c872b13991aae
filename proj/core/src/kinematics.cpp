#include "crackfield/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crackfield/errors.hpp"
#include "crackfield/parallel.hpp"

namespace crackfield {

void EstimatorConfig::validate() const {
    if (min_neighbors < 4) throw ConfigError("EstimatorConfig: min_neighbors must be >= 4");
    if (k_neighbors < min_neighbors) {
        throw ConfigError("EstimatorConfig: k_neighbors must be >= min_neighbors");
    }
    if (weight_scale_mode == WeightScale::FixedH && !(fixed_h_um > 0.0)) {
        throw ConfigError("EstimatorConfig: fixed weight scale requires fixed_h_um > 0");
    }
    if (!(max_condition >= 1.0)) throw ConfigError("EstimatorConfig: max_condition must be >= 1");
}

const char* to_string(SampleFlag flag) {
    switch (flag) {
        case SampleFlag::None: return "ok";
        case SampleFlag::TooFewNeighbors: return "too-few-neighbors";
        case SampleFlag::IllConditioned: return "ill-conditioned";
        case SampleFlag::NonPositiveJacobian: return "non-positive-jacobian";
    }
    return "unknown";
}

namespace {

DefGradSample invalid_sample(std::int64_t id, SampleFlag flag, int n_neighbors,
                             double condition) {
    DefGradSample s;
    s.particle_id = id;
    s.flag = flag;
    s.n_neighbors = n_neighbors;
    s.condition = condition;
    s.polar.R = s.polar.U = s.polar.V = Mat3::identity();
    return s;
}

void estimate_one(const ParticleSet& set, const EstimatorConfig& cfg, std::size_t i,
                  std::vector<Neighbor>& scratch, DefGradSample& out) {
    const ParticleTrack& center = set.track(i);
    set.knn_of(i, static_cast<std::size_t>(cfg.k_neighbors), scratch);
    const int n = static_cast<int>(scratch.size());
    if (n < cfg.min_neighbors) {
        out = invalid_sample(center.id, SampleFlag::TooFewNeighbors, n,
                             std::numeric_limits<double>::infinity());
        return;
    }

    double h = cfg.weight_scale_mode == EstimatorConfig::WeightScale::FixedH
                   ? cfg.fixed_h_um
                   : scratch.back().dist;   // k-th neighbor distance (sorted ascending)
    if (!(h > 0.0)) h = std::numeric_limits<double>::min();
    const double inv_h2 = 1.0 / (h * h);

    Mat3 a, m;   // A = sum w dx dX^T, M = sum w dX dX^T
    for (const Neighbor& nb : scratch) {
        const ParticleTrack& t = set.track(nb.index);
        const Vec3 dX = t.X - center.X;
        const Vec3 dx = t.x - center.x;
        const double w = std::exp(-dX.norm2() * inv_h2);
        a += Mat3::outer(dx, dX) * w;
        m += Mat3::outer(dX, dX) * w;
    }

    const EigenSym3 em = eig_sym3(m);
    const double lam_max = em.values[0];
    const double lam_min = em.values[2];
    const double condition = (lam_min > 0.0 && lam_max > 0.0)
                                 ? lam_max / lam_min
                                 : std::numeric_limits<double>::infinity();
    if (!(condition <= cfg.max_condition)) {
        out = invalid_sample(center.id, SampleFlag::IllConditioned, n, condition);
        return;
    }

    // M^-1 through its eigensystem: already in hand and symmetric-exact
    Mat3 minv;
    for (int e = 0; e < 3; ++e) {
        minv += Mat3::outer(em.vectors[e], em.vectors[e]) * (1.0 / em.values[e]);
    }
    const Mat3 f = a * minv;

    out.particle_id = center.id;
    out.F = f;
    out.n_neighbors = n;
    out.condition = condition;
    out.J = f.det();

    double wsum = 0.0, werr2 = 0.0;
    for (const Neighbor& nb : scratch) {
        const ParticleTrack& t = set.track(nb.index);
        const Vec3 dX = t.X - center.X;
        const Vec3 r = (t.x - center.x) - f * dX;
        const double w = std::exp(-dX.norm2() * inv_h2);
        wsum += w;
        werr2 += w * r.norm2();
    }
    out.residual_rms_um = wsum > 0.0 ? std::sqrt(werr2 / wsum) : 0.0;

    if (!(out.J > 0.0)) {
        const DefGradSample partial = out;
        out = invalid_sample(center.id, SampleFlag::NonPositiveJacobian, n, condition);
        out.F = partial.F;
        out.J = partial.J;
        out.residual_rms_um = partial.residual_rms_um;
        return;
    }

    try {
        out.polar = polar_decompose(f);
    } catch (const ConditioningError&) {
        // det F > 0 but a stretch underflowed the polar kernel's floor
        const DefGradSample partial = out;
        out = invalid_sample(center.id, SampleFlag::IllConditioned, n, condition);
        out.F = partial.F;
        out.J = partial.J;
        out.residual_rms_um = partial.residual_rms_um;
        return;
    }
    const EigenSym3 ev = eig_sym3(out.polar.V);
    for (int e = 0; e < 3; ++e) {
        out.principal_stretches[e] = ev.values[e];
        out.principal_dirs[e] = ev.vectors[e];
    }
    out.flag = SampleFlag::None;
}

} // namespace

std::vector<DefGradSample> estimate_def_grad(const ParticleSet& set,
                                             const EstimatorConfig& cfg, int threads) {
    cfg.validate();
    if (set.size() == 0) throw InvalidInputError("estimate_def_grad: empty particle set");

    std::vector<DefGradSample> out(set.size());
    const int nt = resolve_thread_count(threads);
    if (nt <= 1) {
        std::vector<Neighbor> scratch;
        for (std::size_t i = 0; i < set.size(); ++i) estimate_one(set, cfg, i, scratch, out[i]);
        return out;
    }
    // per-particle outputs are independent, so chunked threading cannot
    // change any value
    parallel_for(0, set.size(), nt, [&](std::size_t i) {
        thread_local std::vector<Neighbor> scratch;
        estimate_one(set, cfg, i, scratch, out[i]);
    });
    return out;
}

FieldQualityReport field_quality_report(const std::vector<DefGradSample>& samples) {
    if (samples.empty()) throw InvalidInputError("field_quality_report: no samples");

    FieldQualityReport rep;
    rep.n_total = samples.size();
    std::vector<double> residuals;
    residuals.reserve(samples.size());
    double jsum = 0.0, jsum2 = 0.0;
    rep.j_min = std::numeric_limits<double>::infinity();
    rep.j_max = -std::numeric_limits<double>::infinity();
    for (const DefGradSample& s : samples) {
        switch (s.flag) {
            case SampleFlag::None:
                ++rep.n_valid;
                residuals.push_back(s.residual_rms_um);
                jsum += s.J;
                jsum2 += s.J * s.J;
                rep.j_min = std::min(rep.j_min, s.J);
                rep.j_max = std::max(rep.j_max, s.J);
                break;
            case SampleFlag::TooFewNeighbors: ++rep.n_too_few_neighbors; break;
            case SampleFlag::IllConditioned: ++rep.n_ill_conditioned; break;
            case SampleFlag::NonPositiveJacobian: ++rep.n_non_positive_j; break;
        }
    }
    if (rep.n_valid > 0) {
        std::sort(residuals.begin(), residuals.end());
        const auto pct = [&](double q) {
            const auto idx = static_cast<std::size_t>(q * static_cast<double>(residuals.size() - 1));
            return residuals[idx];
        };
        rep.residual_rms_p50_um = pct(0.50);
        rep.residual_rms_p90_um = pct(0.90);
        rep.residual_rms_p99_um = pct(0.99);
        rep.residual_rms_max_um = residuals.back();
        const auto nv = static_cast<double>(rep.n_valid);
        rep.j_mean = jsum / nv;
        const double var = std::max(0.0, jsum2 / nv - rep.j_mean * rep.j_mean);
        rep.j_stddev = std::sqrt(var);
    } else {
        rep.j_min = 0.0;
        rep.j_max = 0.0;
    }
    return rep;
}

} // namespace crackfield
