#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "semsplat/camera.hpp"
#include "semsplat/cloud.hpp"
#include "semsplat/tensor.hpp"

namespace semsplat {

/// Rows are ground truth, columns prediction.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::uint64_t> counts;

    explicit ConfusionMatrix(int classes = 0)
        : num_classes(classes), counts(static_cast<std::size_t>(classes) * classes, 0) {}
    std::uint64_t at(int gt, int pred) const { return counts[static_cast<std::size_t>(gt) * num_classes + pred]; }
    std::uint64_t total() const;
    /// Pixels where either map holds 255 are skipped.
    void add(const LabelMap& ground_truth, const LabelMap& prediction);
};

struct MiouResult {
    std::vector<double> iou;          // per class; NaN when the class is absent from both maps
    std::vector<std::uint8_t> scored; // 1 when the class takes part in the mean
    double mean = 0.0;
    ConfusionMatrix confusion;
};

MiouResult miou_from_confusion(const ConfusionMatrix& cm);
MiouResult miou(const std::vector<LabelMap>& predictions, const std::vector<LabelMap>& ground_truth, int num_classes);

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components; // F x 3, columns are principal directions (zero past the rank)
    int rank = 0;
    bool degenerate() const { return rank < 3; }
    Eigen::Vector3d project(std::span<const double> feature) const;
};

/// Fits on every pixel of the given maps. Sign convention: each component's
/// largest-magnitude loading is positive.
PcaModel pca_fit(const std::vector<const FeatureMap*>& maps);

/// Projects onto the three components and min-max normalises each channel
/// over the given maps jointly.
std::vector<Image> pca_apply(const std::vector<const FeatureMap*>& maps, const PcaModel& model);

/// Per-image PCA visualisation. When the feature covariance has rank < 3 the
/// missing channels are zero; with strict set this throws DegenerateFeatures
/// instead. Throws EmptyInput when H * W < 3.
Image pca_visualize(const FeatureMap& features, bool strict = false, bool* degenerate = nullptr);

/// One PCA fitted across all maps, for cross-view comparisons.
std::vector<Image> pca_visualize_scene(const std::vector<FeatureMap>& maps, bool strict = false);

struct TimingReport {
    std::vector<double> milliseconds;
    double min = 0.0, mean = 0.0, max = 0.0;
};

TimingReport summarize_timings(std::vector<double> milliseconds);

/// Wall-clock time of one render per camera. An extra warm-up render of the
/// first camera precedes the timed renders and is discarded.
TimingReport timing_report(const GaussianCloud& cloud, const std::vector<Camera>& cameras, int threads = 1);

} // namespace semsplat
