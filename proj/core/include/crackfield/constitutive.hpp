#pragma once

#include <cstdint>
#include <vector>

#include "crackfield/kinematics.hpp"
#include "crackfield/tensor3.hpp"

namespace crackfield {

struct MaterialModel {
    double mu_pa = 35000.0;       // shear modulus
    bool use_isochoric = false;   // replace I1 by J^(-2/3) I1

    void validate() const;        // throws ConfigError when mu <= 0
};

enum class FieldUnit : std::uint8_t { JoulePerCubicMeter, Dimensionless, Pascal };

const char* to_string(FieldUnit unit);

struct ScalarSample {
    std::int64_t particle_id = 0;
    Vec3 X;          // reference position, µm
    Vec3 x;          // deformed position, µm
    double value = 0.0;
    bool valid = true;
};

struct ScalarField {
    FieldUnit unit = FieldUnit::Dimensionless;
    std::vector<ScalarSample> samples;
};

struct VectorSample {
    std::int64_t particle_id = 0;
    Vec3 X;
    Vec3 x;
    Vec3 v;          // unit direction
    bool valid = true;
};

struct VectorField {
    std::vector<VectorSample> samples;
};

// W_i = (mu/2)(I1 - 3), I1 = tr(F F^T); isochoric variant uses J^(-2/3) I1.
// `set` supplies positions and must be the set the samples came from (same
// order). Samples flagged invalid upstream stay invalid; a W below -mu*1e-12
// (possible for the raw variant when J deviates from 1) is flagged invalid
// here; values in (-mu*1e-12, 0) are clamped to 0.
ScalarField strain_energy_density(const std::vector<DefGradSample>& samples,
                                  const ParticleSet& set, const MaterialModel& mat);

struct StretchField {
    ScalarField value;       // lambda_1 of V, dimensionless
    VectorField direction;   // matching eigenvector of V, deformed frame
};

StretchField max_principal_stretch_field(const std::vector<DefGradSample>& samples,
                                         const ParticleSet& set);

} // namespace crackfield
