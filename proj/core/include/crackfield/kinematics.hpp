#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "crackfield/particles.hpp"
#include "crackfield/tensor3.hpp"

namespace crackfield {

struct EstimatorConfig {
    enum class WeightScale { KthNeighborDistance, FixedH };

    int k_neighbors = 20;
    WeightScale weight_scale_mode = WeightScale::KthNeighborDistance;
    double fixed_h_um = 0.0;      // used when weight_scale_mode == FixedH
    int min_neighbors = 6;
    double max_condition = 1e6;

    void validate() const;        // throws ConfigError
};

// why a sample was flagged invalid; None means the sample is usable
enum class SampleFlag : std::uint8_t {
    None = 0,
    TooFewNeighbors,
    IllConditioned,       // moment-matrix condition number beyond the cap
    NonPositiveJacobian,  // fitted det F <= 0
};

const char* to_string(SampleFlag flag);

struct DefGradSample {
    std::int64_t particle_id = 0;
    Mat3 F = Mat3::identity();
    PolarFactors polar;                       // R = U = V = I when invalid
    std::array<double, 3> principal_stretches{};  // sorted descending; eigenvalues of V
    std::array<Vec3, 3> principal_dirs{};         // eigenvectors of V, deformed frame
    double J = 0.0;                           // det F
    double residual_rms_um = 0.0;
    int n_neighbors = 0;
    double condition = 0.0;                   // cond(M) of the moment matrix
    SampleFlag flag = SampleFlag::None;

    bool valid() const { return flag == SampleFlag::None; }
};

// Weighted-least-squares F at every particle: F_i minimizes
// sum_j w_ij |dx_ij - F dX_ij|^2 over the k nearest reference-space
// neighbors, w = exp(-|dX|^2/h^2). Invalid samples are flagged, never
// dropped; output order matches the set's track order; results are bitwise
// identical for any thread count.
std::vector<DefGradSample> estimate_def_grad(const ParticleSet& set,
                                             const EstimatorConfig& cfg,
                                             int threads = 0);

struct FieldQualityReport {
    std::size_t n_total = 0;
    std::size_t n_valid = 0;
    std::size_t n_too_few_neighbors = 0;
    std::size_t n_ill_conditioned = 0;
    std::size_t n_non_positive_j = 0;
    double residual_rms_p50_um = 0.0;
    double residual_rms_p90_um = 0.0;
    double residual_rms_p99_um = 0.0;
    double residual_rms_max_um = 0.0;
    double j_mean = 0.0;          // valid samples only
    double j_stddev = 0.0;
    double j_min = 0.0;
    double j_max = 0.0;

    double invalid_fraction() const {
        return n_total == 0 ? 0.0 : 1.0 - static_cast<double>(n_valid) / static_cast<double>(n_total);
    }
};

FieldQualityReport field_quality_report(const std::vector<DefGradSample>& samples);

} // namespace crackfield
