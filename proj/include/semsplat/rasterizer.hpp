#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semsplat/camera.hpp"
#include "semsplat/cloud.hpp"
#include "semsplat/tensor.hpp"

namespace semsplat {

inline constexpr double kLowPassRegularizer = 0.3; // px^2 added to the 2D covariance
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kFootprintSigma = 3.0;
inline constexpr double kTerminationThreshold = 1e-4;
inline constexpr int kTileSize = 16;

struct Projected2DGaussian {
    Vec2 mean2d;
    Mat2 cov2d;          // regularized
    Vec3 conic;          // inverse of cov2d as (a, b, c) = [[a, b], [b, c]]
    double depth = 0.0;
    Vec3 color;          // clamped to [0, 1]
    Vec3 raw_color;      // before clamping
    std::span<const double> feature;
    double opacity = 0.0;
    std::uint32_t source_index = 0;
};

struct RenderSettings {
    int threads = 1;
    bool early_termination = true;
    double termination_threshold = kTerminationThreshold;
    double near = kDefaultNearPlane;
};

/// One entry of a pixel's front-to-back contributor list.
struct Contributor {
    std::uint32_t splat; // index into RenderOutput::splats (depth-sorted)
    double alpha;        // clamped alpha'
};

struct RenderOutput {
    Image color_image;      // H x W x 3
    FeatureMap feature_map; // H x W x F
    Image alpha_map;        // H x W x 1
    std::vector<Projected2DGaussian> splats; // depth-sorted

    // Contributor records, grouped per tile. Pixel p owns
    // tile_records[pixel_tile[p]][pixel_begin[p] .. pixel_begin[p] + pixel_count[p]).
    std::vector<std::vector<Contributor>> tile_records;
    std::vector<std::uint32_t> pixel_tile;
    std::vector<std::uint32_t> pixel_begin;
    std::vector<std::uint32_t> pixel_count;

    std::span<const Contributor> contributors(std::size_t pixel) const {
        return {tile_records[pixel_tile[pixel]].data() + pixel_begin[pixel], pixel_count[pixel]};
    }
    /// Blending weights alpha_i * prod_{j<i} (1 - alpha_j) for one pixel.
    std::vector<double> weights(std::size_t pixel) const;
};

/// Gradients shaped like the cloud attributes, plus the screen-space mean
/// gradient (N x 2, pixels) used by densification.
struct GradientBundle {
    std::vector<double> positions, rotations, log_scales, opacity_logits, sh_coeffs, features;
    std::vector<double> mean2d;
    std::vector<std::uint8_t> visible; // 1 when the point was projected into the view

    static GradientBundle zeros_like(const GaussianCloud& cloud);
    void set_zero();
    void add(const GradientBundle& other);
    bool all_finite() const;
};

/// Projects every point to the view, culling points behind the near plane or
/// whose mean lands more than 1.3x the half-extent from the image center.
std::vector<Projected2DGaussian> project(const GaussianCloud& cloud, const Camera& camera,
                                         double near = kDefaultNearPlane);

/// Ascending depth, ties by ascending source index.
void depth_sort(std::vector<Projected2DGaussian>& splats);

/// sigma * exp(-0.5 d^T Sigma^-1 d), clamped to kMaxAlpha.
double alpha_at(const Projected2DGaussian& splat, const Vec2& pixel);

/// Pixel (x, y) is sampled at its center (x + 0.5, y + 0.5).
inline Vec2 pixel_center(int x, int y) { return {x + 0.5, y + 0.5}; }

RenderOutput render(const GaussianCloud& cloud, const Camera& camera,
                    const RenderSettings& settings = {});

/// Analytic gradients of a scalar loss given its adjoints with respect to the
/// rendered color image (H x W x 3) and feature map (H x W x F).
GradientBundle render_backward(const GaussianCloud& cloud, const Camera& camera,
                               const RenderOutput& output, const Image& d_color,
                               const FeatureMap& d_feature, const RenderSettings& settings = {});

/// Same, accumulating into an existing bundle (which must be shaped like the cloud).
void render_backward_into(const GaussianCloud& cloud, const Camera& camera,
                          const RenderOutput& output, const Image& d_color,
                          const FeatureMap& d_feature, const RenderSettings& settings,
                          GradientBundle& grads);

} // namespace semsplat
