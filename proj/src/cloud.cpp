#include "semsplat/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "semsplat/errors.hpp"
#include "semsplat/random.hpp"
#include "semsplat/sh.hpp"
#include "semsplat/spatial_index.hpp"

namespace semsplat {

void GaussianCloud::resize(std::size_t n) {
    positions.resize(3 * n, 0.0);
    rotations.resize(4 * n, 0.0);
    log_scales.resize(3 * n, 0.0);
    opacity_logits.resize(n, 0.0);
    sh_coeffs.resize(static_cast<std::size_t>(sh_stride()) * n, 0.0);
    features.resize(static_cast<std::size_t>(feature_dim) * n, 0.0);
}

void GaussianCloud::validate() const {
    if (sh_degree < 0 || sh_degree > 3) fail(ErrorKind::ConfigError, "sh_degree must be in 0..3");
    if (feature_dim <= 0) fail(ErrorKind::ConfigError, "feature_dim must be positive");
    const std::size_t n = size();
    if (positions.size() != 3 * n || rotations.size() != 4 * n || log_scales.size() != 3 * n ||
        sh_coeffs.size() != static_cast<std::size_t>(sh_stride()) * n ||
        features.size() != static_cast<std::size_t>(feature_dim) * n) {
        fail(ErrorKind::ConfigError, "cloud attribute arrays disagree on the point count");
    }
    if (n > kMaxPoints) fail(ErrorKind::ConfigError, "cloud exceeds the point cap");
    for (const auto* arr : {&positions, &rotations, &log_scales, &opacity_logits, &sh_coeffs, &features}) {
        for (double v : *arr) {
            if (!std::isfinite(v)) fail(ErrorKind::ConfigError, "cloud contains a non-finite entry");
        }
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

Vec3 activate_scale(const Vec3& log_scale) {
    return log_scale.cwiseMax(kMinLogScale).cwiseMin(kMaxLogScale).array().exp().matrix();
}

ActivatedCloud activate(const GaussianCloud& cloud) {
    ActivatedCloud out;
    const std::size_t n = cloud.size();
    out.opacity.resize(n);
    out.scale.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        out.opacity[i] = sigmoid(cloud.opacity_logits[i]);
        const Vec3 s = activate_scale(cloud.log_scale(i));
        for (int a = 0; a < 3; ++a) out.scale[3 * i + a] = s[a];
    }
    return out;
}

Mat3 covariance_3d(const Vec4& rotation, const Vec3& log_scale) {
    const Mat3 R = quaternion_to_rotation(rotation);
    const Vec3 s = activate_scale(log_scale);
    const Mat3 M = R * s.asDiagonal();
    Mat3 cov = M * M.transpose();
    // Exact symmetry regardless of rounding in the product.
    cov = 0.5 * (cov + cov.transpose()).eval();
    return cov;
}

GaussianCloud init_from_points(std::span<const SparsePoint> points, int feature_dim,
                               std::uint64_t seed, int sh_degree) {
    if (points.empty()) fail(ErrorKind::EmptyInput, "cannot initialise a cloud from zero points");
    if (points.size() > kMaxPoints) {
        fail(ErrorKind::ConfigError, "initial point count exceeds " + std::to_string(kMaxPoints));
    }
    GaussianCloud cloud;
    cloud.sh_degree = sh_degree;
    cloud.feature_dim = feature_dim;
    const std::size_t n = points.size();
    cloud.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) cloud.positions[3 * i + a] = points[i].position[a];
    }
    const SpatialIndex index = SpatialIndex::build(cloud.positions);
    const std::size_t neighbours = std::min<std::size_t>(3, n - 1);
    const double opacity_logit = logit(0.1);
    Rng rng(seed);
    std::vector<std::size_t> nn;
    std::vector<double> d2;
    const auto stride = static_cast<std::size_t>(cloud.sh_stride());
    for (std::size_t i = 0; i < n; ++i) {
        double log_scale = 0.0;
        if (neighbours > 0) {
            index.knn(&cloud.positions[3 * i], neighbours, i, nn, d2);
            double mean = 0.0;
            for (double v : d2) mean += std::sqrt(v);
            mean /= static_cast<double>(neighbours);
            log_scale = std::log(std::max(mean, 1e-7));
        }
        for (int a = 0; a < 3; ++a) cloud.log_scales[3 * i + a] = log_scale;
        cloud.rotations[4 * i] = 1.0;
        cloud.opacity_logits[i] = opacity_logit;
        for (int c = 0; c < 3; ++c) {
            cloud.sh_coeffs[i * stride + c] = (points[i].color[c] - 0.5) / kShC0;
        }
        for (int f = 0; f < feature_dim; ++f) {
            cloud.features[i * feature_dim + f] = rng.uniform(-0.01, 0.01);
        }
    }
    return cloud;
}

} // namespace semsplat
