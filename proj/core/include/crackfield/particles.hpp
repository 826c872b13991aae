#pragma once

#include <cstdint>
#include <vector>

#include "crackfield/spatial.hpp"
#include "crackfield/tensor3.hpp"

namespace crackfield {

struct ParticleTrack {
    std::int64_t id = 0;
    Vec3 X;                 // reference position, µm
    Vec3 x;                 // deformed position, µm
    double quality = 1.0;   // linking confidence in [0, 1]
};

// Immutable ordered particle collection with a reference-space spatial index.
// Neighbor queries return exactly the k nearest by reference-space Euclidean
// distance, ties broken by lower particle id.
class ParticleSet {
public:
    ParticleSet() = default;

    const std::vector<ParticleTrack>& tracks() const { return tracks_; }
    const ParticleTrack& track(std::size_t i) const { return tracks_[i]; }
    std::size_t size() const { return tracks_.size(); }
    const Aabb& bounds() const { return bounds_; }
    const KdTree3& index() const { return index_; }

    // k nearest neighbors of track i, excluding i itself; Neighbor::index is
    // a track index into tracks()
    void knn_of(std::size_t i, std::size_t k, std::vector<Neighbor>& out) const {
        index_.knn(tracks_[i].X, k, i, out);
    }
    void knn_at(const Vec3& X_um, std::size_t k, std::vector<Neighbor>& out) const {
        index_.knn(X_um, k, KdTree3::npos, out);
    }

    // -1 when the id is unknown
    std::ptrdiff_t index_of_id(std::int64_t id) const;

    friend ParticleSet build_particle_set(std::vector<ParticleTrack> tracks);

private:
    std::vector<ParticleTrack> tracks_;
    std::vector<std::pair<std::int64_t, std::size_t>> id_lookup_;  // sorted by id
    Aabb bounds_;
    KdTree3 index_;
};

// Validates (nonempty, unique finite-valued tracks, quality in [0,1]) and
// builds bounds + index. Throws InvalidInputError on violations.
ParticleSet build_particle_set(std::vector<ParticleTrack> tracks);

} // namespace crackfield
