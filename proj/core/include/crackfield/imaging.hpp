#pragma once

#include <cstdint>
#include <vector>

#include "crackfield/fracture.hpp"
#include "crackfield/particles.hpp"
#include "crackfield/tensor3.hpp"

namespace crackfield {

enum class Channel : std::uint8_t { Scatter = 0, Fluorescence = 1 };

struct VoxelVolume {
    std::uint32_t nx = 0, ny = 0, nz = 0;
    double dx_um = 0.68, dy_um = 0.68, dz_um = 2.0;
    Channel channel = Channel::Scatter;
    std::vector<std::uint16_t> data;   // x-fastest, then y, then z

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(nx) * ny * nz;
    }
    std::uint16_t& at(std::uint32_t i, std::uint32_t j, std::uint32_t k) {
        return data[(static_cast<std::size_t>(k) * ny + j) * nx + i];
    }
    std::uint16_t at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
        return data[(static_cast<std::size_t>(k) * ny + j) * nx + i];
    }
    // world position of a voxel center, µm (volume origin at 0,0,0)
    Vec3 voxel_center_um(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
        return {(i + 0.5) * dx_um, (j + 0.5) * dy_um, (k + 0.5) * dz_um};
    }
    Vec3 extent_um() const { return {nx * dx_um, ny * dy_um, nz * dz_um}; }

    void validate() const;   // dims >= 1, payload length matches
};

// opened parabolic slot: void where |y - plane_y| < 0.5 c sqrt(tip_x - x)
struct CrackVoid {
    double tip_x_um = 0.0;
    double plane_y_um = 0.0;
    double c_um_per_sqrt_um = 0.0;   // total opening = c * sqrt(r)
    double z_lo_um = 0.0, z_hi_um = 0.0;
};

// what the fluorescence channel sees: gel everywhere minus declared voids
struct GelShape {
    std::vector<Aabb> void_boxes_um;
    std::vector<CrackVoid> cracks;

    bool in_void(const Vec3& p_um) const;
};

struct ImagingConfig {
    // geometry
    std::uint32_t nx = 512, ny = 512, nz = 200;
    double dx_um = 0.68, dy_um = 0.68, dz_um = 2.0;   // z from the 2 µm scan step
    // optics + blob appearance
    double psf_sigma_lateral_um = 0.5;
    double psf_sigma_axial_um = 4.0;    // ~8 µm light-sheet thickness
    double blob_diameter_um = 1.1;
    double peak_amplitude = 80.0;       // centered-blob peak voxel, counts
    double gel_intensity = 1000.0;      // fluorescence channel level, counts
    // noise model
    double noise_sigma = 8.0;           // SNR = peak_amplitude / noise_sigma
    double noise_offset = 100.0;
    // detection
    double bp_sigma1_lateral_um = 0.0;  // 0 = auto from psf + blob size
    double bp_sigma1_axial_um = 0.0;
    double bp_sigma_ratio = 2.0;        // sigma2 = ratio * sigma1
    double peak_threshold = 0.0;        // absolute DoG response; 0 = auto
    double peak_threshold_quantile = 0.0;  // when in (0,1): DoG-quantile threshold
    double auto_threshold_k = 8.0;      // auto: k * robust DoG noise scale
    int centroid_half_xy = 2;           // centroid window half-size, voxels
    int centroid_half_z = 3;
    // linking
    double link_max_disp_um = 8.0;
    bool link_predictor = false;
    double link_grid_um = 64.0;

    void validate() const;              // throws ConfigError
    double sigma_eff_lateral_um() const;
    double sigma_eff_axial_um() const;
};

struct RenderedStack {
    VoxelVolume scatter;
    VoxelVolume fluorescence;
    std::size_t n_clipped = 0;   // particles outside the volume, silently skipped
};

enum class Frame : std::uint8_t { Reference = 0, Deformed = 1 };

// Anisotropic-Gaussian blob splatting plus Gaussian noise; the fluorescence
// channel images the gel minus voids. Deterministic for a fixed seed and any
// thread count (per-slice noise streams).
RenderedStack render_stack(const ParticleSet& set, Frame which, const ImagingConfig& cfg,
                           const GelShape* gel_shape, std::uint64_t seed, int threads = 0);

struct DetectedBlob {
    Vec3 centroid_um;
    double peak_intensity = 0.0;    // background-subtracted raw counts
    double diameter_um = 0.0;       // FWHM-style lateral estimate
    double quality = 0.0;           // in [0,1), monotone in band-pass response
    double response = 0.0;          // raw DoG response at the peak
};

// Difference-of-Gaussians band-pass, strict 26-neighbor local maxima above
// threshold, intensity-weighted centroid refinement on the raw volume.
std::vector<DetectedBlob> detect(const VoxelVolume& scatter, const ImagingConfig& cfg,
                                 int threads = 0);

struct LinkResult {
    std::vector<ParticleTrack> tracks;   // id = index of the reference blob
    std::size_t n_ref_unmatched = 0;
    std::size_t n_def_unmatched = 0;
};

// Mutual-nearest-neighbor matching within link_max_disp_um; optionally a
// second pass where a coarse per-cell median displacement predicts deformed
// positions before re-matching the leftovers.
LinkResult link(const std::vector<DetectedBlob>& ref_blobs,
                const std::vector<DetectedBlob>& def_blobs, const ImagingConfig& cfg,
                int threads = 0);

// Otsu between-class-variance threshold over the 16-bit histogram.
std::uint16_t otsu_threshold(const VoxelVolume& volume);

// Crack-face points from the fluorescence channel: scans y-columns for
// interior void runs (gel above and below) and emits the bounding gel-void
// interface positions as upper/lower face points.
std::vector<FacePoint> extract_crack_faces(const VoxelVolume& fluorescence,
                                           std::uint16_t gel_threshold,
                                           int min_run_voxels = 2);

} // namespace crackfield
