#include "crackfield/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "crackfield/errors.hpp"
#include "crackfield/parallel.hpp"
#include "crackfield/rng.hpp"
#include "crackfield/spatial.hpp"

namespace crackfield {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;

double phi_cdf_diff(double lo, double hi, double sigma) {
    // integral of a unit-peak-area Gaussian over [lo, hi] around 0
    return 0.5 * (std::erf(hi * kInvSqrt2 / sigma) - std::erf(lo * kInvSqrt2 / sigma));
}
} // namespace

void VoxelVolume::validate() const {
    if (nx < 1 || ny < 1 || nz < 1) throw InvalidInputError("VoxelVolume: zero dimension");
    if (!(dx_um > 0.0 && dy_um > 0.0 && dz_um > 0.0)) {
        throw InvalidInputError("VoxelVolume: voxel sizes must be > 0");
    }
    if (data.size() != voxel_count()) {
        throw InvalidInputError("VoxelVolume: payload length does not match dimensions");
    }
}

bool GelShape::in_void(const Vec3& p) const {
    for (const Aabb& b : void_boxes_um) {
        if (b.contains(p)) return true;
    }
    for (const CrackVoid& c : cracks) {
        if (p.z < c.z_lo_um || p.z > c.z_hi_um) continue;
        const double r = c.tip_x_um - p.x;
        if (r <= 0.0) continue;
        if (std::abs(p.y - c.plane_y_um) < 0.5 * c.c_um_per_sqrt_um * std::sqrt(r)) return true;
    }
    return false;
}

void ImagingConfig::validate() const {
    if (nx < 1 || ny < 1 || nz < 1) throw ConfigError("ImagingConfig: dims must be >= 1");
    if (!(dx_um > 0.0 && dy_um > 0.0 && dz_um > 0.0)) {
        throw ConfigError("ImagingConfig: voxel sizes must be > 0");
    }
    if (!(psf_sigma_lateral_um > 0.0 && psf_sigma_axial_um > 0.0)) {
        throw ConfigError("ImagingConfig: PSF sigmas must be > 0");
    }
    if (!(blob_diameter_um > 0.0)) throw ConfigError("ImagingConfig: blob diameter must be > 0");
    if (!(peak_amplitude > 0.0)) throw ConfigError("ImagingConfig: peak amplitude must be > 0");
    if (!(noise_sigma >= 0.0) || !(noise_offset >= 0.0)) {
        throw ConfigError("ImagingConfig: noise parameters must be >= 0");
    }
    if (!(bp_sigma_ratio > 1.0)) throw ConfigError("ImagingConfig: bp_sigma_ratio must be > 1");
    if (peak_threshold < 0.0) throw ConfigError("ImagingConfig: peak threshold must be >= 0");
    if (peak_threshold_quantile < 0.0 || peak_threshold_quantile >= 1.0) {
        throw ConfigError("ImagingConfig: threshold quantile must be in [0,1)");
    }
    if (!(auto_threshold_k > 0.0)) throw ConfigError("ImagingConfig: auto_threshold_k must be > 0");
    if (centroid_half_xy < 1 || centroid_half_z < 1) {
        throw ConfigError("ImagingConfig: centroid window must be >= 1 voxel");
    }
    if (!(link_max_disp_um > 0.0)) throw ConfigError("ImagingConfig: link_max_disp must be > 0");
    if (!(link_grid_um > 0.0)) throw ConfigError("ImagingConfig: link_grid must be > 0");
}

double ImagingConfig::sigma_eff_lateral_um() const {
    const double quarter = 0.25 * blob_diameter_um;
    return std::sqrt(psf_sigma_lateral_um * psf_sigma_lateral_um + quarter * quarter);
}

double ImagingConfig::sigma_eff_axial_um() const {
    const double quarter = 0.25 * blob_diameter_um;
    return std::sqrt(psf_sigma_axial_um * psf_sigma_axial_um + quarter * quarter);
}

// ---- rendering ----

RenderedStack render_stack(const ParticleSet& set, Frame which, const ImagingConfig& cfg,
                           const GelShape* gel_shape, std::uint64_t seed, int threads) {
    cfg.validate();

    RenderedStack out;
    for (VoxelVolume* v : {&out.scatter, &out.fluorescence}) {
        v->nx = cfg.nx;
        v->ny = cfg.ny;
        v->nz = cfg.nz;
        v->dx_um = cfg.dx_um;
        v->dy_um = cfg.dy_um;
        v->dz_um = cfg.dz_um;
        v->data.assign(v->voxel_count(), 0);
    }
    out.scatter.channel = Channel::Scatter;
    out.fluorescence.channel = Channel::Fluorescence;

    const double sx = cfg.sigma_eff_lateral_um();
    const double sy = sx;
    const double sz = cfg.sigma_eff_axial_um();
    // peak-normalization: a perfectly centered blob hits peak_amplitude
    const double center_mass = phi_cdf_diff(-0.5 * cfg.dx_um, 0.5 * cfg.dx_um, sx) *
                               phi_cdf_diff(-0.5 * cfg.dy_um, 0.5 * cfg.dy_um, sy) *
                               phi_cdf_diff(-0.5 * cfg.dz_um, 0.5 * cfg.dz_um, sz);
    const double amp = cfg.peak_amplitude / center_mass;
    const double rx = 4.0 * sx, ry = 4.0 * sy, rz = 4.0 * sz;   // support, µm

    const Vec3 ext = out.scatter.extent_um();
    std::vector<Vec3> pos;
    pos.reserve(set.size());
    for (const ParticleTrack& t : set.tracks()) {
        const Vec3 p = which == Frame::Reference ? t.X : t.x;
        if (p.x < 0.0 || p.y < 0.0 || p.z < 0.0 || p.x >= ext.x || p.y >= ext.y || p.z >= ext.z) {
            ++out.n_clipped;
            continue;
        }
        pos.push_back(p);
    }

    // per-slice blob lists: fixed accumulation order regardless of threading
    std::vector<std::vector<std::uint32_t>> slice_blobs(cfg.nz);
    for (std::uint32_t b = 0; b < pos.size(); ++b) {
        const auto k_lo = static_cast<std::int64_t>(std::floor((pos[b].z - rz) / cfg.dz_um - 0.5));
        const auto k_hi = static_cast<std::int64_t>(std::ceil((pos[b].z + rz) / cfg.dz_um - 0.5));
        for (std::int64_t k = std::max<std::int64_t>(0, k_lo);
             k <= std::min<std::int64_t>(cfg.nz - 1, k_hi); ++k) {
            slice_blobs[static_cast<std::size_t>(k)].push_back(b);
        }
    }

    const auto quantize = [](double v) {
        return static_cast<std::uint16_t>(std::clamp<long>(std::lround(v), 0, 65535));
    };

    parallel_for(0, cfg.nz, threads, [&](std::size_t k) {
        std::vector<double> plane(static_cast<std::size_t>(cfg.nx) * cfg.ny, 0.0);
        const double zc = (static_cast<double>(k) + 0.5) * cfg.dz_um;
        for (const std::uint32_t b : slice_blobs[k]) {
            const Vec3& p = pos[b];
            const double wz = phi_cdf_diff(zc - 0.5 * cfg.dz_um - p.z,
                                           zc + 0.5 * cfg.dz_um - p.z, sz);
            const auto i_lo = std::max<std::int64_t>(
                0, static_cast<std::int64_t>(std::floor((p.x - rx) / cfg.dx_um - 0.5)));
            const auto i_hi = std::min<std::int64_t>(
                cfg.nx - 1, static_cast<std::int64_t>(std::ceil((p.x + rx) / cfg.dx_um - 0.5)));
            const auto j_lo = std::max<std::int64_t>(
                0, static_cast<std::int64_t>(std::floor((p.y - ry) / cfg.dy_um - 0.5)));
            const auto j_hi = std::min<std::int64_t>(
                cfg.ny - 1, static_cast<std::int64_t>(std::ceil((p.y + ry) / cfg.dy_um - 0.5)));
            for (std::int64_t j = j_lo; j <= j_hi; ++j) {
                const double yc = (static_cast<double>(j) + 0.5) * cfg.dy_um;
                const double wy = phi_cdf_diff(yc - 0.5 * cfg.dy_um - p.y,
                                               yc + 0.5 * cfg.dy_um - p.y, sy);
                double* row = plane.data() + (static_cast<std::size_t>(j) * cfg.nx);
                for (std::int64_t i = i_lo; i <= i_hi; ++i) {
                    const double xc = (static_cast<double>(i) + 0.5) * cfg.dx_um;
                    const double wx = phi_cdf_diff(xc - 0.5 * cfg.dx_um - p.x,
                                                   xc + 0.5 * cfg.dx_um - p.x, sx);
                    row[i] += amp * wx * wy * wz;
                }
            }
        }

        Rng noise(Rng::mix(seed, k, static_cast<std::uint64_t>(Channel::Scatter)));
        std::uint16_t* dst = out.scatter.data.data() + k * plane.size();
        for (std::size_t v = 0; v < plane.size(); ++v) {
            dst[v] = quantize(cfg.noise_offset + plane[v] + cfg.noise_sigma * noise.normal());
        }

        Rng fnoise(Rng::mix(seed, k, static_cast<std::uint64_t>(Channel::Fluorescence)));
        std::uint16_t* fdst = out.fluorescence.data.data() + k * plane.size();
        for (std::uint32_t j = 0; j < cfg.ny; ++j) {
            for (std::uint32_t i = 0; i < cfg.nx; ++i) {
                const Vec3 c = out.fluorescence.voxel_center_um(i, j, static_cast<std::uint32_t>(k));
                const double gel =
                    (gel_shape != nullptr && gel_shape->in_void(c)) ? 0.0 : cfg.gel_intensity;
                fdst[static_cast<std::size_t>(j) * cfg.nx + i] =
                    quantize(cfg.noise_offset + gel + cfg.noise_sigma * fnoise.normal());
            }
        }
    });
    return out;
}

// ---- detection ----

namespace {

std::vector<double> gauss_kernel(double sigma_vox) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_vox)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i / sigma_vox) * (i / sigma_vox));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

// separable blur along x then y within each z-plane, then along z per column
void gaussian_blur(std::vector<float>& vol, std::uint32_t nx, std::uint32_t ny, std::uint32_t nz,
                   double sx_vox, double sy_vox, double sz_vox, int threads) {
    const std::vector<double> kx = gauss_kernel(sx_vox);
    const std::vector<double> ky = gauss_kernel(sy_vox);
    const std::vector<double> kz = gauss_kernel(sz_vox);
    const int rx = static_cast<int>(kx.size() / 2);
    const int ry = static_cast<int>(ky.size() / 2);
    const int rz = static_cast<int>(kz.size() / 2);
    const std::size_t plane = static_cast<std::size_t>(nx) * ny;

    parallel_for(0, nz, threads, [&](std::size_t k) {
        float* p = vol.data() + k * plane;
        std::vector<float> line(std::max(nx, ny));
        for (std::uint32_t j = 0; j < ny; ++j) {
            float* row = p + static_cast<std::size_t>(j) * nx;
            std::copy(row, row + nx, line.begin());
            for (std::uint32_t i = 0; i < nx; ++i) {
                double acc = 0.0;
                for (int t = -rx; t <= rx; ++t) {
                    const auto src = std::clamp<std::int64_t>(static_cast<std::int64_t>(i) + t, 0,
                                                              static_cast<std::int64_t>(nx) - 1);
                    acc += kx[static_cast<std::size_t>(t + rx)] * line[static_cast<std::size_t>(src)];
                }
                row[i] = static_cast<float>(acc);
            }
        }
        for (std::uint32_t i = 0; i < nx; ++i) {
            for (std::uint32_t j = 0; j < ny; ++j) line[j] = p[static_cast<std::size_t>(j) * nx + i];
            for (std::uint32_t j = 0; j < ny; ++j) {
                double acc = 0.0;
                for (int t = -ry; t <= ry; ++t) {
                    const auto src = std::clamp<std::int64_t>(static_cast<std::int64_t>(j) + t, 0,
                                                              static_cast<std::int64_t>(ny) - 1);
                    acc += ky[static_cast<std::size_t>(t + ry)] * line[static_cast<std::size_t>(src)];
                }
                p[static_cast<std::size_t>(j) * nx + i] = static_cast<float>(acc);
            }
        }
    });

    parallel_for(0, plane, threads, [&](std::size_t c) {
        std::vector<float> line(nz);
        for (std::uint32_t k = 0; k < nz; ++k) line[k] = vol[k * plane + c];
        for (std::uint32_t k = 0; k < nz; ++k) {
            double acc = 0.0;
            for (int t = -rz; t <= rz; ++t) {
                const auto src = std::clamp<std::int64_t>(static_cast<std::int64_t>(k) + t, 0,
                                                          static_cast<std::int64_t>(nz) - 1);
                acc += kz[static_cast<std::size_t>(t + rz)] * line[static_cast<std::size_t>(src)];
            }
            vol[k * plane + c] = static_cast<float>(acc);
        }
    });
}

// exact median via the 16-bit histogram
std::uint16_t volume_median(const VoxelVolume& v) {
    std::vector<std::size_t> hist(65536, 0);
    for (const std::uint16_t x : v.data) ++hist[x];
    const std::size_t half = (v.data.size() + 1) / 2;
    std::size_t run = 0;
    for (std::size_t b = 0; b < hist.size(); ++b) {
        run += hist[b];
        if (run >= half) return static_cast<std::uint16_t>(b);
    }
    return 0;
}

// robust noise scale of the band-pass response on a deterministic sample
double robust_sigma(const std::vector<float>& dog) {
    const std::size_t stride = std::max<std::size_t>(1, dog.size() / (1u << 20));
    std::vector<float> sample;
    sample.reserve(dog.size() / stride + 1);
    for (std::size_t i = 0; i < dog.size(); i += stride) sample.push_back(std::abs(dog[i]));
    std::nth_element(sample.begin(), sample.begin() + sample.size() / 2, sample.end());
    return sample[sample.size() / 2] / 0.6745;
}

} // namespace

std::vector<DetectedBlob> detect(const VoxelVolume& scatter, const ImagingConfig& cfg,
                                 int threads) {
    cfg.validate();
    scatter.validate();
    const std::uint32_t nx = scatter.nx, ny = scatter.ny, nz = scatter.nz;

    double s1_lat = cfg.bp_sigma1_lateral_um;
    if (s1_lat <= 0.0) s1_lat = cfg.sigma_eff_lateral_um();
    double s1_ax = cfg.bp_sigma1_axial_um;
    if (s1_ax <= 0.0) s1_ax = cfg.sigma_eff_axial_um();

    std::vector<float> a(scatter.data.begin(), scatter.data.end());
    std::vector<float> b = a;
    gaussian_blur(a, nx, ny, nz, s1_lat / scatter.dx_um, s1_lat / scatter.dy_um,
                  s1_ax / scatter.dz_um, threads);
    gaussian_blur(b, nx, ny, nz, cfg.bp_sigma_ratio * s1_lat / scatter.dx_um,
                  cfg.bp_sigma_ratio * s1_lat / scatter.dy_um,
                  cfg.bp_sigma_ratio * s1_ax / scatter.dz_um, threads);
    parallel_for(0, a.size(), threads, [&](std::size_t i) { a[i] -= b[i]; });
    b.clear();
    b.shrink_to_fit();
    const std::vector<float>& dog = a;

    double threshold = cfg.peak_threshold;
    if (threshold <= 0.0 && cfg.peak_threshold_quantile > 0.0) {
        const std::size_t stride = std::max<std::size_t>(1, dog.size() / (1u << 20));
        std::vector<float> sample;
        for (std::size_t i = 0; i < dog.size(); i += stride) sample.push_back(dog[i]);
        const auto idx = static_cast<std::size_t>(cfg.peak_threshold_quantile *
                                                  static_cast<double>(sample.size() - 1));
        std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(idx),
                         sample.end());
        threshold = sample[idx];
    } else if (threshold <= 0.0) {
        threshold = cfg.auto_threshold_k * robust_sigma(dog);
    }

    const std::uint16_t background = volume_median(scatter);

    // strict 26-neighbor maxima, slab-partitioned so any thread count scans
    // the same voxels in the same slab order
    const std::uint32_t slab = 16;
    const std::size_t n_slabs = (nz + slab - 1) / slab;
    std::vector<std::vector<DetectedBlob>> per_slab(n_slabs);

    parallel_for(0, n_slabs, threads, [&](std::size_t si) {
        const std::uint32_t k0 = static_cast<std::uint32_t>(si) * slab;
        const std::uint32_t k1 = std::min(nz, k0 + slab);
        std::vector<DetectedBlob>& found = per_slab[si];
        for (std::uint32_t k = std::max(1u, k0); k < std::min(nz - 1, k1); ++k) {
            for (std::uint32_t j = 1; j + 1 < ny; ++j) {
                for (std::uint32_t i = 1; i + 1 < nx; ++i) {
                    const float v = dog[(static_cast<std::size_t>(k) * ny + j) * nx + i];
                    if (!(v > threshold)) continue;
                    bool is_max = true;
                    for (int dk = -1; dk <= 1 && is_max; ++dk) {
                        for (int dj = -1; dj <= 1 && is_max; ++dj) {
                            for (int di = -1; di <= 1; ++di) {
                                if (di == 0 && dj == 0 && dk == 0) continue;
                                const std::size_t idx =
                                    (static_cast<std::size_t>(k + dk) * ny + (j + dj)) * nx +
                                    (i + di);
                                if (!(v > dog[idx])) {
                                    is_max = false;
                                    break;
                                }
                            }
                        }
                    }
                    if (!is_max) continue;

                    // intensity-weighted centroid on the raw counts
                    double wsum = 0.0, cx = 0.0, cy = 0.0, cz = 0.0;
                    double m2x = 0.0, m2y = 0.0;
                    for (int dk = -cfg.centroid_half_z; dk <= cfg.centroid_half_z; ++dk) {
                        const std::int64_t kk = static_cast<std::int64_t>(k) + dk;
                        if (kk < 0 || kk >= nz) continue;
                        for (int dj = -cfg.centroid_half_xy; dj <= cfg.centroid_half_xy; ++dj) {
                            const std::int64_t jj = static_cast<std::int64_t>(j) + dj;
                            if (jj < 0 || jj >= ny) continue;
                            for (int di = -cfg.centroid_half_xy; di <= cfg.centroid_half_xy;
                                 ++di) {
                                const std::int64_t ii = static_cast<std::int64_t>(i) + di;
                                if (ii < 0 || ii >= nx) continue;
                                const double raw =
                                    scatter.at(static_cast<std::uint32_t>(ii),
                                               static_cast<std::uint32_t>(jj),
                                               static_cast<std::uint32_t>(kk));
                                const double w = std::max(0.0, raw - background);
                                wsum += w;
                                cx += w * static_cast<double>(ii);
                                cy += w * static_cast<double>(jj);
                                cz += w * static_cast<double>(kk);
                                m2x += w * static_cast<double>(ii) * static_cast<double>(ii);
                                m2y += w * static_cast<double>(jj) * static_cast<double>(jj);
                            }
                        }
                    }
                    if (!(wsum > 0.0)) continue;
                    cx /= wsum;
                    cy /= wsum;
                    cz /= wsum;
                    const double var_lat =
                        std::max(0.0, 0.5 * ((m2x / wsum - cx * cx) + (m2y / wsum - cy * cy)));

                    DetectedBlob blob;
                    blob.centroid_um = {(cx + 0.5) * scatter.dx_um, (cy + 0.5) * scatter.dy_um,
                                        (cz + 0.5) * scatter.dz_um};
                    blob.peak_intensity =
                        static_cast<double>(scatter.at(i, j, k)) - background;
                    blob.diameter_um = 2.355 * std::sqrt(var_lat) * scatter.dx_um;
                    blob.response = v;
                    blob.quality = 1.0 - std::exp(-static_cast<double>(v) / threshold);
                    found.push_back(blob);
                }
            }
        }
    });

    std::vector<DetectedBlob> out;
    for (const auto& part : per_slab) out.insert(out.end(), part.begin(), part.end());
    return out;
}

// ---- linking ----

namespace {

struct CellKey {
    std::int64_t cx, cy, cz;
    bool operator<(const CellKey& o) const {
        if (cx != o.cx) return cx < o.cx;
        if (cy != o.cy) return cy < o.cy;
        return cz < o.cz;
    }
};

Vec3 component_median(std::vector<Vec3>& v) {
    Vec3 m;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> vals;
        vals.reserve(v.size());
        for (const Vec3& p : v) vals.push_back(p[c]);
        std::sort(vals.begin(), vals.end());
        const std::size_t n = vals.size();
        m[c] = (n % 2 == 1) ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    }
    return m;
}

} // namespace

LinkResult link(const std::vector<DetectedBlob>& ref_blobs,
                const std::vector<DetectedBlob>& def_blobs, const ImagingConfig& cfg,
                int threads) {
    cfg.validate();
    if (ref_blobs.empty() || def_blobs.empty()) {
        throw InvalidInputError("link: both blob sets must be nonempty");
    }

    std::vector<Vec3> rp, dp;
    rp.reserve(ref_blobs.size());
    dp.reserve(def_blobs.size());
    for (const DetectedBlob& b : ref_blobs) rp.push_back(b.centroid_um);
    for (const DetectedBlob& b : def_blobs) dp.push_back(b.centroid_um);
    const KdTree3 ref_tree(rp);
    const KdTree3 def_tree(dp);

    const double max_d = cfg.link_max_disp_um;
    std::vector<std::ptrdiff_t> r2d(rp.size(), -1), d2r(dp.size(), -1);

    const auto nearest = [&](const KdTree3& tree, const Vec3& q, double limit) -> std::ptrdiff_t {
        thread_local std::vector<Neighbor> nn;
        tree.knn(q, 1, KdTree3::npos, nn);
        if (nn.empty() || nn[0].dist > limit) return -1;
        return static_cast<std::ptrdiff_t>(nn[0].index);
    };

    const auto mutual_pass = [&](const std::vector<Vec3>& ref_query_pos) {
        std::vector<std::ptrdiff_t> cand_rd(rp.size(), -1);
        parallel_for(0, rp.size(), threads, [&](std::size_t i) {
            if (r2d[i] >= 0) return;
            cand_rd[i] = nearest(def_tree, ref_query_pos[i], max_d);
        });
        // reverse check sequentially: mutual wins are order-independent, the
        // loop just applies them
        for (std::size_t i = 0; i < rp.size(); ++i) {
            const std::ptrdiff_t j = cand_rd[i];
            if (j < 0 || d2r[static_cast<std::size_t>(j)] >= 0) continue;
            // nearest unmatched ref to def j, measured in the same predicted space
            double best = std::numeric_limits<double>::infinity();
            std::ptrdiff_t best_i = -1;
            thread_local std::vector<Neighbor> nn;
            // query enough neighbors to skip already-matched refs
            for (std::size_t k = 2; k <= 64 && best_i < 0; k *= 2) {
                ref_tree.knn(dp[static_cast<std::size_t>(j)], k, KdTree3::npos, nn);
                for (const Neighbor& n : nn) {
                    if (r2d[n.index] >= 0) continue;
                    const Vec3 diff = ref_query_pos[n.index] - dp[static_cast<std::size_t>(j)];
                    const double dd = diff.norm();
                    if (dd < best || (dd == best && static_cast<std::ptrdiff_t>(n.index) < best_i)) {
                        best = dd;
                        best_i = static_cast<std::ptrdiff_t>(n.index);
                    }
                }
                if (nn.size() < k) break;   // exhausted the set
            }
            if (best_i == static_cast<std::ptrdiff_t>(i)) {
                r2d[i] = j;
                d2r[static_cast<std::size_t>(j)] = static_cast<std::ptrdiff_t>(i);
            }
        }
    };

    mutual_pass(rp);

    if (cfg.link_predictor) {
        // coarse displacement field: per-cell component median of first-pass matches
        std::map<CellKey, std::vector<Vec3>> cells;
        std::vector<Vec3> all;
        for (std::size_t i = 0; i < rp.size(); ++i) {
            if (r2d[i] < 0) continue;
            const Vec3 disp = dp[static_cast<std::size_t>(r2d[i])] - rp[i];
            const CellKey key{static_cast<std::int64_t>(std::floor(rp[i].x / cfg.link_grid_um)),
                              static_cast<std::int64_t>(std::floor(rp[i].y / cfg.link_grid_um)),
                              static_cast<std::int64_t>(std::floor(rp[i].z / cfg.link_grid_um))};
            cells[key].push_back(disp);
            all.push_back(disp);
        }
        if (!all.empty()) {
            const Vec3 global = component_median(all);
            std::map<CellKey, Vec3> cell_median;
            for (auto& [key, disps] : cells) cell_median[key] = component_median(disps);
            std::vector<Vec3> predicted = rp;
            for (std::size_t i = 0; i < rp.size(); ++i) {
                const CellKey key{
                    static_cast<std::int64_t>(std::floor(rp[i].x / cfg.link_grid_um)),
                    static_cast<std::int64_t>(std::floor(rp[i].y / cfg.link_grid_um)),
                    static_cast<std::int64_t>(std::floor(rp[i].z / cfg.link_grid_um))};
                const auto it = cell_median.find(key);
                predicted[i] = rp[i] + (it != cell_median.end() ? it->second : global);
            }
            mutual_pass(predicted);
        }
    }

    LinkResult out;
    for (std::size_t i = 0; i < rp.size(); ++i) {
        if (r2d[i] < 0) {
            ++out.n_ref_unmatched;
            continue;
        }
        const auto j = static_cast<std::size_t>(r2d[i]);
        out.tracks.push_back(ParticleTrack{static_cast<std::int64_t>(i), rp[i], dp[j],
                                           std::min(ref_blobs[i].quality, def_blobs[j].quality)});
    }
    for (std::size_t j = 0; j < dp.size(); ++j) {
        if (d2r[j] < 0) ++out.n_def_unmatched;
    }
    return out;
}

// ---- gel channel ----

std::uint16_t otsu_threshold(const VoxelVolume& volume) {
    volume.validate();
    std::vector<double> hist(65536, 0.0);
    for (const std::uint16_t v : volume.data) hist[v] += 1.0;
    const double total = static_cast<double>(volume.data.size());

    double sum_all = 0.0;
    for (std::size_t b = 0; b < hist.size(); ++b) sum_all += static_cast<double>(b) * hist[b];

    double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
    std::uint16_t best_t = 0;
    for (std::size_t t = 0; t + 1 < hist.size(); ++t) {
        w0 += hist[t];
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += static_cast<double>(t) * hist[t];
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (var > best_var) {
            best_var = var;
            best_t = static_cast<std::uint16_t>(t + 1);   // threshold: v >= t+1 is foreground
        }
    }
    return best_t;
}

std::vector<FacePoint> extract_crack_faces(const VoxelVolume& fluorescence,
                                           std::uint16_t gel_threshold, int min_run_voxels) {
    fluorescence.validate();
    if (min_run_voxels < 1) throw ConfigError("extract_crack_faces: min_run_voxels must be >= 1");

    std::vector<FacePoint> out;
    for (std::uint32_t k = 0; k < fluorescence.nz; ++k) {
        for (std::uint32_t i = 0; i < fluorescence.nx; ++i) {
            // scan the y-column for interior void runs
            std::int64_t run_start = -1;
            bool seen_gel = false;
            for (std::uint32_t j = 0; j <= fluorescence.ny; ++j) {
                const bool gel =
                    j < fluorescence.ny && fluorescence.at(i, j, k) >= gel_threshold;
                if (!gel && j < fluorescence.ny) {
                    if (run_start < 0) run_start = j;
                    continue;
                }
                if (run_start >= 0) {
                    const std::int64_t run_len = static_cast<std::int64_t>(j) - run_start;
                    // interior run: gel below (before start) and above (now)
                    if (seen_gel && j < fluorescence.ny && run_len >= min_run_voxels) {
                        const double x = (i + 0.5) * fluorescence.dx_um;
                        const double z = (k + 0.5) * fluorescence.dz_um;
                        // face sits on the void/gel boundary between voxel centers
                        const double y_lo = (static_cast<double>(run_start)) * fluorescence.dy_um;
                        const double y_hi = (static_cast<double>(j)) * fluorescence.dy_um;
                        out.push_back(FacePoint{{x, y_hi, z}, true});
                        out.push_back(FacePoint{{x, y_lo, z}, false});
                    }
                    run_start = -1;
                }
                if (gel) seen_gel = true;
            }
        }
    }
    return out;
}

} // namespace crackfield
