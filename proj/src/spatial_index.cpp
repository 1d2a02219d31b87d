#include "semsplat/spatial_index.hpp"

#include <algorithm>
#include <string>

#include "semsplat/errors.hpp"

namespace semsplat {

namespace {

constexpr std::uint32_t kLeafSize = 8;

struct Candidate {
    double d2;
    std::size_t index;
    bool operator<(const Candidate& o) const {
        return d2 < o.d2 || (d2 == o.d2 && index < o.index);
    }
};

// Bounded sorted list; k is small so insertion sort beats a heap.
class BestK {
public:
    explicit BestK(std::size_t k) : k_(k) { items_.reserve(k + 1); }

    bool full() const { return items_.size() == k_; }
    double worst() const { return items_.back().d2; }

    void offer(const Candidate& c) {
        if (k_ == 0) return;
        if (full() && !(c < items_.back())) return;
        auto pos = std::upper_bound(items_.begin(), items_.end(), c);
        items_.insert(pos, c);
        if (items_.size() > k_) items_.pop_back();
    }

    const std::vector<Candidate>& items() const { return items_; }

private:
    std::size_t k_;
    std::vector<Candidate> items_;
};

} // namespace

SpatialIndex SpatialIndex::build(std::span<const double> positions, std::uint64_t generation) {
    if (positions.empty() || positions.size() % 3 != 0) {
        fail(ErrorKind::EmptyInput, "spatial index needs at least one 3D point");
    }
    SpatialIndex index;
    index.generation_ = generation;
    index.points_.assign(positions.begin(), positions.end());
    const auto n = static_cast<std::uint32_t>(positions.size() / 3);
    index.order_.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) index.order_[i] = i;
    index.nodes_.reserve(2 * (n / kLeafSize + 1));
    index.build_node(0, n);
    return index;
}

std::uint32_t SpatialIndex::build_node(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= kLeafSize) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
    for (std::uint32_t i = begin; i < end; ++i) {
        const double* p = &points_[3 * order_[i]];
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a) {
        if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    }
    const std::uint32_t mid = begin + (end - begin) / 2;
    // Full ordering (coordinate, index) keeps the build deterministic.
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double pa = points_[3 * a + axis], pb = points_[3 * b + axis];
                         return pa < pb || (pa == pb && a < b);
                     });
    const double split = points_[3 * order_[mid] + axis];
    const std::uint32_t left = build_node(begin, mid);
    const std::uint32_t right = build_node(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void SpatialIndex::knn(const double query[3], std::size_t k, std::optional<std::size_t> exclude,
                       std::vector<std::size_t>& indices, std::vector<double>& sq_distances) const {
    const std::size_t available = size() - ((exclude && *exclude < size()) ? 1 : 0);
    if (k > available) {
        fail(ErrorKind::KTooLarge, "requested " + std::to_string(k) + " neighbours but only " +
                                       std::to_string(available) + " candidates exist");
    }
    BestK best(k);
    indices.clear();
    sq_distances.clear();
    if (k == 0) return;

    // Iterative descent; a subtree is skipped only when its slab is strictly
    // farther than the current worst, so equal-distance ties are still visited.
    struct Pending {
        std::uint32_t node;
        double slab_d2;
    };
    std::vector<Pending> stack;
    stack.push_back({0, 0.0});
    while (!stack.empty()) {
        const Pending item = stack.back();
        stack.pop_back();
        if (best.full() && item.slab_d2 > best.worst()) continue;
        const Node& node = nodes_[item.node];
        if (node.axis < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const std::uint32_t idx = order_[i];
                if (exclude && idx == *exclude) continue;
                const double* p = &points_[3 * idx];
                const double dx = p[0] - query[0], dy = p[1] - query[1], dz = p[2] - query[2];
                best.offer({dx * dx + dy * dy + dz * dz, idx});
            }
            continue;
        }
        const double diff = query[node.axis] - node.split;
        const std::uint32_t near = diff < 0 ? node.left : node.right;
        const std::uint32_t far = diff < 0 ? node.right : node.left;
        // Points equal to the split value may sit on either side, so the far
        // side is bounded by the squared offset, which is 0 when diff == 0.
        stack.push_back({far, std::max(item.slab_d2, diff * diff)});
        stack.push_back({near, item.slab_d2});
    }
    for (const auto& c : best.items()) {
        indices.push_back(c.index);
        sq_distances.push_back(c.d2);
    }
}

std::vector<std::size_t> SpatialIndex::knn(const double query[3], std::size_t k,
                                           std::optional<std::size_t> exclude) const {
    std::vector<std::size_t> indices;
    std::vector<double> d2;
    knn(query, k, exclude, indices, d2);
    return indices;
}

} // namespace semsplat
