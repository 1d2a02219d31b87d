#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "semsplat/camera.hpp"
#include "semsplat/tensor.hpp"

namespace semsplat {

struct SynthConfig {
    int num_classes = 3; // foreground classes 1..num_classes; 0 is background
    int num_blobs = 5;
    int num_views = 30;
    int width = 256;
    int height = 256;
    int labeled_views = 3;
    std::uint64_t seed = 0;
    int ground_points = 3000;
    int blob_points = 800;

    void validate() const; // ConfigError
    static SynthConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Ellipsoid x^T (R diag(axes)^-2 R^T) x = 1 around center, resting on the
/// ground plane z = 0.
struct Blob {
    Vec3 center;
    Vec3 axes;
    Mat3 rotation; // local -> world
    int cls = 1;
    Vec3 color;
};

struct SynthWorld {
    std::vector<Blob> blobs;
    double ground_half_size = 2.0;
    Vec3 light = Vec3(0.4, 0.3, 1.0).normalized();
    int num_classes = 4; // including background
};

SynthWorld make_world(const SynthConfig& config);
std::vector<Camera> make_cameras(const SynthConfig& config);

struct OracleView {
    Image image;
    LabelMap labels;    // 0 for ground and empty space
    LabelMap instances; // blob j -> j + 1, ground -> num_blobs + 1, nothing -> 0
};

/// Analytic ray casting through pixel centers with flat Lambertian shading.
OracleView oracle_render(const SynthWorld& world, const Camera& camera);

/// Surface samples on the ground and on the visible part of every blob.
std::vector<SparsePoint> sample_surface_points(const SynthWorld& world, const SynthConfig& config);

/// Indices of the views that keep their labels, evenly spread over the orbit.
std::vector<int> labeled_view_indices(const SynthConfig& config);

/// Writes a full scene bundle (see load_scene) plus instances/ and gt_full/.
void write_synth_bundle(const SynthConfig& config, const std::filesystem::path& out);

} // namespace semsplat
