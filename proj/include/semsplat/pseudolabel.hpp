#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "semsplat/tensor.hpp"

namespace semsplat {

inline constexpr double kDefaultBoundaryMargin = 0.15;

/// Instance maps use 0 for "no instance" and ids 1..K otherwise.
struct BoundaryResult {
    std::vector<std::uint8_t> flagged; // indexed by instance id, 0 or 1
    LabelMap mask;                     // union of flagged instances' pixels
};

/// An instance is flagged when one of its pixels lies closer than
/// margin_fraction * min(H, W) to the image border, i.e.
/// min(x, y, W - 1 - x, H - 1 - y) < margin_fraction * min(H, W).
/// Throws ConfigError unless 0 < margin_fraction < 0.5.
BoundaryResult derive_boundary_mask(const LabelMap& instances, double margin_fraction);

/// Majority ground-truth class per instance id (ties to the smaller class,
/// 255 when an instance has no labelled pixel). Index 0 is always 255.
std::vector<std::uint8_t> assign_pseudo_class(const LabelMap& instances, const LabelMap& gt_labels);

struct PseudoLabelSet {
    std::vector<std::uint8_t> instance_class;   // by instance id
    std::vector<std::uint8_t> instance_flagged; // by instance id, from the reference view
    std::vector<LabelMap> labels;               // S^p per view, 255 where unassigned
    std::vector<LabelMap> boundary;             // B per view, 1 on flagged assigned instances
};

/// Propagates the reference view's instance classes to every view by id.
/// Throws MissingReferenceLabel when gt_labels is null.
PseudoLabelSet build_pseudo_labels(const std::vector<LabelMap>& instance_maps, std::size_t reference_view,
                                   const LabelMap* gt_labels, double margin_fraction);

} // namespace semsplat
