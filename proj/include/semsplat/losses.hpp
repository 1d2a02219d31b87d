#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semsplat/cloud.hpp"
#include "semsplat/decoder.hpp"
#include "semsplat/spatial_index.hpp"
#include "semsplat/tensor.hpp"

namespace semsplat {

struct LossWeights {
    double a = 0.5; // 2D aggregation
    double b = 0.1; // 3D aggregation
    void validate() const;
};

struct LossReport {
    double l1 = 0.0;
    double dssim = 0.0;
    double ce = 0.0;
    double agg2d = 0.0;
    double agg3d = 0.0;
    double total = 0.0;
};

/// A scalar loss together with its adjoint with respect to the first argument.
struct TensorLoss {
    double value = 0.0;
    Tensor3<double> adjoint;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean absolute difference; the subgradient at exact ties is 0.
TensorLoss l1_loss(const Image& rendered, const Image& target);

/// (1 - SSIM) / 2 with an 11x11 Gaussian window (sigma 1.5) evaluated at every
/// window position that fits inside the image, per channel, then averaged.
TensorLoss dssim_loss(const Image& rendered, const Image& target);

/// Mean softmax cross-entropy over pixels with mask != 0 (all pixels when mask
/// is null) whose label is not 255. Returns 0 with a zero adjoint when nothing
/// is counted.
TensorLoss ce_loss(const Tensor3<double>& logits, const LabelMap& labels, const LabelMap* mask = nullptr);

/// Row form used by the trainer: one row of logits per selected pixel.
/// d_logits is resized to match. Returns the mean over rows whose label is not 255.
double ce_loss_rows(const RowMatrix& logits, std::span<const std::uint8_t> labels, RowMatrix& d_logits);

/// Channel softmax of `logits` into `out` (same length).
void softmax(std::span<const double> logits, std::span<double> out);

/// KL(softmax(a) || softmax(b)). Optionally accumulates scale * dKL/da and
/// scale * dKL/db.
double softmax_kl(std::span<const double> a, std::span<const double> b, double scale = 0.0,
                  std::span<double> da = {}, std::span<double> db = {});

/// Offsets to the k nearest grid pixels of (y, x), excluding itself, ordered by
/// distance and then row-major index of the neighbour.
class GridNeighbors {
public:
    GridNeighbors(int height, int width, int k);
    void query(int y, int x, std::vector<std::size_t>& out) const;

private:
    int height_, width_, k_;
    struct Offset {
        int dy, dx;
    };
    std::vector<Offset> offsets_; // all offsets within radius_, sorted
    long long radius2_ = 0;
};

/// Mean KL from m sampled anchor pixels to their k nearest grid pixels.
/// Throws InvalidSampleCount unless m >= 1, k >= 1 and m * (k + 1) <= H * W.
TensorLoss agg2d_loss(const FeatureMap& features, int m, int k, std::uint64_t seed);

struct PointFeatureLoss {
    double value = 0.0;
    std::vector<double> d_features; // N x feature_dim
};

/// Same KL form over point features; neighbours come from the index snapshot
/// (which must cover exactly the cloud's points). Positions receive no gradient.
/// m is clamped to N. Throws TooFewPoints unless N > k.
PointFeatureLoss agg3d_loss(const GaussianCloud& cloud, const SpatialIndex& index, int m, int k,
                            std::uint64_t seed);

/// Fills parts.total; throws NonFiniteLoss if any part or the total is not finite.
LossReport total_loss(const LossReport& parts, const LossWeights& weights);

} // namespace semsplat
