#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semsplat/camera.hpp"
#include "semsplat/tensor.hpp"

namespace semsplat {

enum class LabelKind { None, GroundTruth, Pseudo };

struct View {
    std::string name; // image file name, e.g. view_000.png
    Camera camera;
    Image image;
    LabelKind kind = LabelKind::None;
    LabelMap labels;   // ground truth or S^p
    LabelMap boundary; // B, pseudo views only
};

struct Scene {
    std::vector<View> views;
    std::vector<SparsePoint> points;
    int num_classes = 0;
};

/// Bundle layout:
///   scene.json            {"num_classes": C, "reference_view": name, ...}
///   colmap/               cameras.txt images.txt points3D.txt
///   images/<name>         RGB PNG per view
///   labels/<name>         sparse ground-truth label maps (indexed PNG)
///   pseudo/<stem>_label.png, pseudo/<stem>_mask.png   S^p and B
///   instances/            external instance maps + manifest.csv
///   gt_full/<name>        dense labels for evaluation (synthetic scenes)
/// Pseudo labels are attached only when load_pseudo is set and only to views
/// without ground truth.
Scene load_scene(const std::filesystem::path& dir, bool load_pseudo = true);

std::string view_stem(const std::string& name);

} // namespace semsplat
