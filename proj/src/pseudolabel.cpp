#include "semsplat/pseudolabel.hpp"

#include <algorithm>
#include <string>

#include "semsplat/errors.hpp"

namespace semsplat {

namespace {

int max_instance(const LabelMap& m) {
    int mx = 0;
    for (auto v : m.data) mx = std::max<int>(mx, v);
    return mx;
}

void require_single_channel(const LabelMap& m, const char* what) {
    if (m.channels != 1) fail(ErrorKind::ShapeMismatch, std::string(what) + " must be single-channel");
}

} // namespace

BoundaryResult derive_boundary_mask(const LabelMap& instances, double margin_fraction) {
    require_single_channel(instances, "instance map");
    if (!(margin_fraction > 0.0 && margin_fraction < 0.5)) {
        fail(ErrorKind::ConfigError, "margin fraction must lie in (0, 0.5)");
    }
    const int H = instances.height, W = instances.width;
    const double margin = margin_fraction * std::min(H, W);
    BoundaryResult r;
    r.flagged.assign(static_cast<std::size_t>(max_instance(instances)) + 1, 0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const auto id = instances.at(y, x);
            if (id == 0) continue;
            const int d = std::min({x, y, W - 1 - x, H - 1 - y});
            if (d < margin) r.flagged[id] = 1;
        }
    }
    r.mask = LabelMap(H, W, 1);
    for (std::size_t p = 0; p < instances.data.size(); ++p) {
        const auto id = instances.data[p];
        r.mask.data[p] = (id != 0 && r.flagged[id]) ? 1 : 0;
    }
    return r;
}

std::vector<std::uint8_t> assign_pseudo_class(const LabelMap& instances, const LabelMap& gt_labels) {
    require_single_channel(instances, "instance map");
    if (!instances.same_shape(gt_labels)) {
        fail(ErrorKind::ShapeMismatch, "instance map and label map differ in size");
    }
    const std::size_t ids = static_cast<std::size_t>(max_instance(instances)) + 1;
    std::vector<std::vector<std::size_t>> votes(ids, std::vector<std::size_t>(256, 0));
    for (std::size_t p = 0; p < instances.data.size(); ++p) {
        const auto id = instances.data[p];
        const auto label = gt_labels.data[p];
        if (id == 0 || label == kIgnoreLabel) continue;
        ++votes[id][label];
    }
    std::vector<std::uint8_t> cls(ids, kIgnoreLabel);
    for (std::size_t id = 1; id < ids; ++id) {
        std::size_t best = 0;
        for (int c = 0; c < 255; ++c) {
            if (votes[id][c] > best) {
                best = votes[id][c];
                cls[id] = static_cast<std::uint8_t>(c);
            }
        }
    }
    return cls;
}

PseudoLabelSet build_pseudo_labels(const std::vector<LabelMap>& instance_maps, std::size_t reference_view,
                                   const LabelMap* gt_labels, double margin_fraction) {
    if (reference_view >= instance_maps.size()) {
        fail(ErrorKind::ConfigError, "reference view " + std::to_string(reference_view) + " has no instance map");
    }
    if (gt_labels == nullptr) {
        fail(ErrorKind::MissingReferenceLabel, "reference view " + std::to_string(reference_view) +
                                                   " has no ground-truth label");
    }
    const auto& ref = instance_maps[reference_view];
    PseudoLabelSet out;
    out.instance_class = assign_pseudo_class(ref, *gt_labels);
    out.instance_flagged = derive_boundary_mask(ref, margin_fraction).flagged;
    int max_id = 0;
    for (const auto& m : instance_maps) max_id = std::max(max_id, max_instance(m));
    out.instance_class.resize(static_cast<std::size_t>(max_id) + 1, kIgnoreLabel);
    out.instance_flagged.resize(static_cast<std::size_t>(max_id) + 1, 0);

    for (const auto& m : instance_maps) {
        require_single_channel(m, "instance map");
        LabelMap labels(m.height, m.width, 1, kIgnoreLabel);
        LabelMap boundary(m.height, m.width, 1);
        for (std::size_t p = 0; p < m.data.size(); ++p) {
            const auto id = m.data[p];
            if (id == 0) continue;
            const auto cls = out.instance_class[id];
            labels.data[p] = cls;
            boundary.data[p] = (cls != kIgnoreLabel && out.instance_flagged[id]) ? 1 : 0;
        }
        out.labels.push_back(std::move(labels));
        out.boundary.push_back(std::move(boundary));
    }
    return out;
}

} // namespace semsplat
