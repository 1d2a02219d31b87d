#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace semsplat {

/// Exact kd-tree over an N x 3 position snapshot. Immutable after build; safe
/// for concurrent queries.
class SpatialIndex {
public:
    /// Throws EmptyInput when positions is empty.
    static SpatialIndex build(std::span<const double> positions, std::uint64_t generation = 0);

    /// k nearest indices sorted by (distance, index), optionally skipping one index.
    /// Throws KTooLarge when fewer than k candidates exist.
    std::vector<std::size_t> knn(const double query[3], std::size_t k,
                                 std::optional<std::size_t> exclude = std::nullopt) const;

    /// Same as knn but also reports squared distances.
    void knn(const double query[3], std::size_t k, std::optional<std::size_t> exclude,
             std::vector<std::size_t>& indices, std::vector<double>& sq_distances) const;

    std::size_t size() const { return points_.size() / 3; }
    /// Snapshot coordinates of point i.
    const double* point(std::size_t i) const { return &points_[3 * i]; }
    std::uint64_t generation() const { return generation_; }

private:
    struct Node {
        // Leaf when axis < 0: [begin, end) into order_.
        int axis = -1;
        double split = 0.0;
        std::uint32_t begin = 0, end = 0;
        std::uint32_t left = 0, right = 0;
    };

    std::uint32_t build_node(std::uint32_t begin, std::uint32_t end);

    std::vector<double> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::uint64_t generation_ = 0;
};

} // namespace semsplat
