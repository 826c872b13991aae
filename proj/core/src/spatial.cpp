#include "crackfield/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crackfield/errors.hpp"

namespace crackfield {

namespace {
constexpr std::size_t kLeafSize = 16;

struct Candidate {
    double d2;
    std::int64_t key;
    std::size_t index;
};

// a beats b: smaller distance, then smaller key. Used as the heap
// comparator, so the max-heap keeps the worst retained candidate on top.
inline bool better(const Candidate& a, const Candidate& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return a.key < b.key;
}
} // namespace

KdTree3::KdTree3(std::vector<Vec3> points, std::vector<std::int64_t> tie_keys)
    : points_(std::move(points)), keys_(std::move(tie_keys)) {
    if (points_.empty()) throw InvalidInputError("KdTree3: empty point set");
    if (!keys_.empty() && keys_.size() != points_.size()) {
        throw InvalidInputError("KdTree3: tie key count does not match point count");
    }
    if (keys_.empty()) {
        keys_.resize(points_.size());
        std::iota(keys_.begin(), keys_.end(), std::int64_t{0});
    }
    for (const Vec3& p : points_) {
        if (!p.finite()) throw InvalidInputError("KdTree3: non-finite point");
    }
    original_.resize(points_.size());
    std::iota(original_.begin(), original_.end(), std::size_t{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, points_.size());
}

std::int32_t KdTree3::build(std::size_t begin, std::size_t end) {
    Node node;
    if (end - begin <= kLeafSize) {
        node.first = static_cast<std::uint32_t>(begin);
        node.count = static_cast<std::uint32_t>(end - begin);
        nodes_.push_back(node);
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }

    Vec3 lo = points_[begin], hi = points_[begin];
    for (std::size_t i = begin + 1; i < end; ++i) {
        for (int c = 0; c < 3; ++c) {
            lo[c] = std::min(lo[c], points_[i][c]);
            hi[c] = std::max(hi[c], points_[i][c]);
        }
    }
    int axis = 0;
    const Vec3 ext = hi - lo;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;

    const std::size_t mid = begin + (end - begin) / 2;
    // (coordinate, original index) is a total order, so the partition is
    // fully determined by the input, which keeps queries reproducible.
    const auto less = [&](std::size_t ia, std::size_t ib) {
        if (points_[ia][axis] != points_[ib][axis]) return points_[ia][axis] < points_[ib][axis];
        return original_[ia] < original_[ib];
    };
    std::vector<std::size_t> perm(end - begin);
    std::iota(perm.begin(), perm.end(), begin);
    std::nth_element(perm.begin(), perm.begin() + (mid - begin), perm.end(), less);
    // apply the permutation to both arrays
    std::vector<Vec3> tmp_pts(perm.size());
    std::vector<std::size_t> tmp_orig(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        tmp_pts[i] = points_[perm[i]];
        tmp_orig[i] = original_[perm[i]];
    }
    std::copy(tmp_pts.begin(), tmp_pts.end(), points_.begin() + begin);
    std::copy(tmp_orig.begin(), tmp_orig.end(), original_.begin() + begin);

    node.axis = static_cast<std::uint8_t>(axis);
    node.split = points_[mid][axis];
    nodes_.push_back(node);
    const auto id = static_cast<std::int32_t>(nodes_.size() - 1);
    const std::int32_t l = build(begin, mid);
    const std::int32_t r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

void KdTree3::knn(const Vec3& query, std::size_t k, std::size_t exclude,
                  std::vector<Neighbor>& out) const {
    out.clear();
    if (k == 0 || points_.empty()) return;

    std::vector<Candidate> heap;   // max-heap on `better`: top = current worst kept
    heap.reserve(k + 1);

    const auto consider = [&](std::size_t i) {
        const std::size_t orig = original_[i];
        if (orig == exclude) return;
        const Vec3 d = points_[i] - query;
        const Candidate c{d.norm2(), keys_[orig], orig};
        if (heap.size() < k) {
            heap.push_back(c);
            std::push_heap(heap.begin(), heap.end(), better);
        } else if (better(c, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), better);
            heap.back() = c;
            std::push_heap(heap.begin(), heap.end(), better);
        }
    };

    // iterative descent, nearer child first
    std::vector<std::int32_t> stack;
    stack.push_back(root_);
    while (!stack.empty()) {
        const std::int32_t ni = stack.back();
        stack.pop_back();
        if (ni < 0) continue;
        const Node& node = nodes_[static_cast<std::size_t>(ni)];
        if (node.count > 0) {
            for (std::uint32_t i = 0; i < node.count; ++i) consider(node.first + i);
            continue;
        }
        const double delta = query[node.axis] - node.split;
        // prune only when the far side is strictly farther than the worst
        // kept candidate: an exact tie could still win on key order
        if (heap.size() == k && delta * delta > heap.front().d2) {
            stack.push_back(delta < 0.0 ? node.left : node.right);
            continue;
        }
        // push far side first so the near side is explored first
        if (delta < 0.0) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }

    std::sort(heap.begin(), heap.end(), better);
    out.reserve(heap.size());
    for (const Candidate& c : heap) out.push_back(Neighbor{c.index, std::sqrt(c.d2)});
}

} // namespace crackfield
