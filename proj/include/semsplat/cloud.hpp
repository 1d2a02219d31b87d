#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "semsplat/camera.hpp"

namespace semsplat {

inline constexpr int kFeatureDim = 16;
inline constexpr std::size_t kMaxPoints = 300000;
inline constexpr double kMinLogScale = -20.0;
inline constexpr double kMaxLogScale = 10.0;

/// Point set with unconstrained parameters. Every attribute is stored as a flat
/// row-major array with `size()` rows.
struct GaussianCloud {
    int sh_degree = 2;
    int feature_dim = kFeatureDim;

    std::vector<double> positions;      // N x 3
    std::vector<double> rotations;      // N x 4, (w, x, y, z), not necessarily normalized
    std::vector<double> log_scales;     // N x 3
    std::vector<double> opacity_logits; // N
    std::vector<double> sh_coeffs;      // N x 3 * (D + 1)^2
    std::vector<double> features;       // N x feature_dim

    std::size_t size() const { return opacity_logits.size(); }
    int sh_stride() const { return 3 * (sh_degree + 1) * (sh_degree + 1); }

    /// Resizes every attribute to n rows (new rows zero).
    void resize(std::size_t n);
    /// Throws ConfigError on inconsistent array lengths or non-finite entries.
    void validate() const;

    Vec3 position(std::size_t i) const {
        return {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]};
    }
    Vec4 rotation(std::size_t i) const {
        return {rotations[4 * i], rotations[4 * i + 1], rotations[4 * i + 2], rotations[4 * i + 3]};
    }
    Vec3 log_scale(std::size_t i) const {
        return {log_scales[3 * i], log_scales[3 * i + 1], log_scales[3 * i + 2]};
    }
    std::span<const double> sh(std::size_t i) const {
        const auto s = static_cast<std::size_t>(sh_stride());
        return {sh_coeffs.data() + i * s, s};
    }
    std::span<const double> feature(std::size_t i) const {
        const auto f = static_cast<std::size_t>(feature_dim);
        return {features.data() + i * f, f};
    }
};

double sigmoid(double x);
double logit(double p);
/// exp of the log-scale clamped to [kMinLogScale, kMaxLogScale].
Vec3 activate_scale(const Vec3& log_scale);

struct ActivatedCloud {
    std::vector<double> opacity; // N, in (0, 1)
    std::vector<double> scale;   // N x 3, > 0
};

ActivatedCloud activate(const GaussianCloud& cloud);

/// R diag(exp(2 log_scale)) R^T with R from the renormalized quaternion.
Mat3 covariance_3d(const Vec4& rotation, const Vec3& log_scale);

/// Builds a cloud from sparse points: DC color from the point color, isotropic
/// scale from the mean distance to the three nearest neighbours, opacity 0.1,
/// identity rotation and features uniform in [-0.01, 0.01].
GaussianCloud init_from_points(std::span<const SparsePoint> points, int feature_dim,
                               std::uint64_t seed, int sh_degree = 2);

} // namespace semsplat
