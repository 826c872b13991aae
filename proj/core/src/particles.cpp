#include "crackfield/particles.hpp"

#include <algorithm>

#include "crackfield/errors.hpp"

namespace crackfield {

std::ptrdiff_t ParticleSet::index_of_id(std::int64_t id) const {
    const auto it = std::lower_bound(
        id_lookup_.begin(), id_lookup_.end(), id,
        [](const std::pair<std::int64_t, std::size_t>& e, std::int64_t v) { return e.first < v; });
    if (it == id_lookup_.end() || it->first != id) return -1;
    return static_cast<std::ptrdiff_t>(it->second);
}

ParticleSet build_particle_set(std::vector<ParticleTrack> tracks) {
    if (tracks.empty()) throw InvalidInputError("build_particle_set: empty track collection");

    ParticleSet set;
    set.id_lookup_.reserve(tracks.size());
    Aabb box{tracks.front().X, tracks.front().X};
    std::vector<Vec3> pts;
    std::vector<std::int64_t> keys;
    pts.reserve(tracks.size());
    keys.reserve(tracks.size());
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const ParticleTrack& t = tracks[i];
        if (!t.X.finite() || !t.x.finite()) {
            throw InvalidInputError("build_particle_set: non-finite position (id " +
                                    std::to_string(t.id) + ")");
        }
        if (!(t.quality >= 0.0 && t.quality <= 1.0)) {
            throw InvalidInputError("build_particle_set: quality outside [0,1] (id " +
                                    std::to_string(t.id) + ")");
        }
        for (int c = 0; c < 3; ++c) {
            box.lo[c] = std::min(box.lo[c], t.X[c]);
            box.hi[c] = std::max(box.hi[c], t.X[c]);
        }
        set.id_lookup_.emplace_back(t.id, i);
        pts.push_back(t.X);
        keys.push_back(t.id);
    }
    std::sort(set.id_lookup_.begin(), set.id_lookup_.end());
    for (std::size_t i = 1; i < set.id_lookup_.size(); ++i) {
        if (set.id_lookup_[i].first == set.id_lookup_[i - 1].first) {
            throw InvalidInputError("build_particle_set: duplicate particle id " +
                                    std::to_string(set.id_lookup_[i].first));
        }
    }
    set.tracks_ = std::move(tracks);
    set.bounds_ = box;
    set.index_ = KdTree3(std::move(pts), std::move(keys));
    return set;
}

} // namespace crackfield
