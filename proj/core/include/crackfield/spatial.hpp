#pragma once

#include <cstdint>
#include <vector>

#include "crackfield/tensor3.hpp"

namespace crackfield {

struct Neighbor {
    std::size_t index = 0;      // position in the point array handed to the tree
    double dist = 0.0;
};

// Static 3-d kd-tree for k-nearest-neighbor queries. Results are ordered by
// (distance, tie_key) ascending, so queries are deterministic even when
// distances tie; tie keys default to the point index but callers may supply
// their own (particle ids).
class KdTree3 {
public:
    KdTree3() = default;
    // throws InvalidInputError on an empty point set, a non-finite point, or
    // a tie-key vector whose length does not match the points
    explicit KdTree3(std::vector<Vec3> points, std::vector<std::int64_t> tie_keys = {});

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    // k nearest neighbors of `query`. `exclude` (an index into the point
    // array, or npos) is omitted from the result, which is how self-queries
    // skip the particle itself. Returns up to k entries sorted by
    // (distance, tie_key).
    void knn(const Vec3& query, std::size_t k, std::size_t exclude,
             std::vector<Neighbor>& out) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    struct Node {
        // leaf when count > 0: points_[first..first+count)
        std::uint32_t first = 0;
        std::uint32_t count = 0;
        std::uint8_t axis = 0;
        double split = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
    };

    std::int32_t build(std::size_t begin, std::size_t end);

    std::vector<Vec3> points_;          // reordered copy
    std::vector<std::size_t> original_; // points_[i] was input index original_[i]
    std::vector<std::int64_t> keys_;    // tie key per input index
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

} // namespace crackfield
