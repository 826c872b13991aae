#include "crackfield/constitutive.hpp"

#include <cmath>

#include "crackfield/errors.hpp"

namespace crackfield {

void MaterialModel::validate() const {
    if (!(mu_pa > 0.0)) throw ConfigError("MaterialModel: mu_pa must be > 0");
    if (!std::isfinite(mu_pa)) throw ConfigError("MaterialModel: mu_pa must be finite");
}

const char* to_string(FieldUnit unit) {
    switch (unit) {
        case FieldUnit::JoulePerCubicMeter: return "J/m^3";
        case FieldUnit::Dimensionless: return "1";
        case FieldUnit::Pascal: return "Pa";
    }
    return "unknown";
}

namespace {
void check_alignment(const std::vector<DefGradSample>& samples, const ParticleSet& set,
                     const char* who) {
    if (samples.empty()) throw InvalidInputError(std::string(who) + ": no samples");
    if (samples.size() != set.size()) {
        throw InvalidInputError(std::string(who) + ": sample count does not match particle set");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].particle_id != set.track(i).id) {
            throw InvalidInputError(std::string(who) +
                                    ": sample order does not match particle set (id " +
                                    std::to_string(samples[i].particle_id) + ")");
        }
    }
}
} // namespace

ScalarField strain_energy_density(const std::vector<DefGradSample>& samples,
                                  const ParticleSet& set, const MaterialModel& mat) {
    mat.validate();
    check_alignment(samples, set, "strain_energy_density");

    ScalarField field;
    field.unit = FieldUnit::JoulePerCubicMeter;
    field.samples.reserve(samples.size());
    const double eps = mat.mu_pa * 1e-12;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const DefGradSample& s = samples[i];
        const ParticleTrack& t = set.track(i);
        ScalarSample out{s.particle_id, t.X, t.x, 0.0, true};
        if (!s.valid()) {
            out.valid = false;
        } else {
            double i1 = (s.F * s.F.transposed()).trace();
            if (mat.use_isochoric) i1 *= std::pow(s.J, -2.0 / 3.0);
            double w = 0.5 * mat.mu_pa * (i1 - 3.0);
            if (w < -eps) {
                out.valid = false;   // genuinely compressive I1 < 3, not roundoff
                out.value = w;
            } else {
                // |w| inside the mu-scaled roundoff band is numerically zero;
                // rigid motion lands here and must report exactly 0
                out.value = std::abs(w) <= eps ? 0.0 : w;
            }
        }
        field.samples.push_back(out);
    }
    return field;
}

StretchField max_principal_stretch_field(const std::vector<DefGradSample>& samples,
                                         const ParticleSet& set) {
    check_alignment(samples, set, "max_principal_stretch_field");

    StretchField out;
    out.value.unit = FieldUnit::Dimensionless;
    out.value.samples.reserve(samples.size());
    out.direction.samples.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const DefGradSample& s = samples[i];
        const ParticleTrack& t = set.track(i);
        const bool ok = s.valid();
        out.value.samples.push_back(
            ScalarSample{s.particle_id, t.X, t.x, ok ? s.principal_stretches[0] : 0.0, ok});
        out.direction.samples.push_back(
            VectorSample{s.particle_id, t.X, t.x, ok ? s.principal_dirs[0] : Vec3{}, ok});
    }
    return out;
}

} // namespace crackfield
