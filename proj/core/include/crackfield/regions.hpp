#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crackfield/constitutive.hpp"
#include "crackfield/particles.hpp"

namespace crackfield {

// Geometric/threshold particle-subset definition. Membership is always
// decided on reference positions so the region is a material region.
struct RegionSpec {
    enum class Kind { Box, LigamentGeometric, FieldThreshold, Intersection };

    struct Ligament {
        double x_back_um = 0.0;    // trailing crack-front position
        double x_front_um = 0.0;   // leading crack-front position
        double z_lo_um = 0.0;      // front z-overlap interval
        double z_hi_um = 0.0;
        double y_center_um = 0.0;  // mid-plane between the crack steps
        double y_half_width_um = 0.0;
    };

    struct Threshold {
        double quantile = 0.5;     // keep particles with value >= this field quantile
        double quantile_cut = 0.0; // concrete cut, resolved during selection
    };

    Kind kind = Kind::Box;
    Aabb box;                      // Kind::Box
    Ligament ligament;             // Kind::LigamentGeometric
    Threshold threshold;           // Kind::FieldThreshold; field passed at call time
    std::vector<RegionSpec> parts; // Kind::Intersection

    void validate() const;         // throws ConfigError
};

// Particle ids in `set` belonging to the region, in track order. A threshold
// spec anywhere inside requires `field` (same ordering as `set`); the cut is
// at the q-quantile of the field's valid values.
std::vector<std::int64_t> select_region(const ParticleSet& set, const RegionSpec& spec,
                                        const ScalarField* field = nullptr);

struct RadialWeights {
    std::vector<std::int64_t> ids;   // track order of the originating set
    std::vector<double> r_um;        // calibrated radius per particle
    double c_cal = 1.0;
    int k_vol = 6;
    std::string method = "knn-mean-half-distance";
};

// r_i = c_cal * (half the mean distance to the k_vol nearest reference-space
// neighbors); c_cal makes sum (4pi/3) r^3 over the calibration box equal that
// box's volume. Default calibration box: the set bounds shrunk by 15% per
// side (an interior box clear of boundary dilution); pass one explicitly for
// data with cracks or other voids.
RadialWeights radial_weights(const ParticleSet& set, int k_vol = 6,
                             const std::optional<Aabb>& calibration_box_um = {},
                             int threads = 0);

struct RegionEnergy {
    double e_joule = 0.0;
    std::size_t n_particles = 0;       // subset size
    double volume_estimate_m3 = 0.0;   // cell volume over valid-W subset particles
    double coverage = 1.0;             // valid-W fraction of subset (1 when empty)
};

// E = sum over valid subset particles of W_i * (4pi/3) r_i^3, r in meters.
// W must be in J/m^3; ids must exist in both the field and the weights.
RegionEnergy integrate_region_energy(const ScalarField& w,
                                     const std::vector<std::int64_t>& subset,
                                     const RadialWeights& weights);

} // namespace crackfield
