#include "semsplat/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "semsplat/errors.hpp"
#include "semsplat/rasterizer.hpp"

namespace semsplat {

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

void ConfusionMatrix::add(const LabelMap& gt, const LabelMap& pred) {
    if (!gt.same_shape(pred)) {
        fail(ErrorKind::ShapeMismatch, "prediction " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                                           " vs ground truth " + std::to_string(gt.width) + "x" +
                                           std::to_string(gt.height));
    }
    for (std::size_t p = 0; p < gt.data.size(); ++p) {
        const int g = gt.data[p], q = pred.data[p];
        if (g == kIgnoreLabel || q == kIgnoreLabel) continue;
        if (g >= num_classes || q >= num_classes) {
            fail(ErrorKind::LabelOutOfRange, "label " + std::to_string(std::max(g, q)) + " outside [0, " +
                                                 std::to_string(num_classes) + ")");
        }
        ++counts[static_cast<std::size_t>(g) * num_classes + q];
    }
}

MiouResult miou_from_confusion(const ConfusionMatrix& cm) {
    const int C = cm.num_classes;
    MiouResult r{std::vector<double>(C, std::numeric_limits<double>::quiet_NaN()), std::vector<std::uint8_t>(C, 0),
                 0.0, cm};
    double sum = 0.0;
    int scored = 0;
    for (int c = 0; c < C; ++c) {
        const std::uint64_t tp = cm.at(c, c);
        std::uint64_t fn = 0, fp = 0;
        for (int o = 0; o < C; ++o) {
            if (o == c) continue;
            fn += cm.at(c, o);
            fp += cm.at(o, c);
        }
        const std::uint64_t denom = tp + fp + fn;
        if (denom == 0) continue;
        r.iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
        r.scored[c] = 1;
        sum += r.iou[c];
        ++scored;
    }
    r.mean = scored > 0 ? sum / scored : 0.0;
    return r;
}

MiouResult miou(const std::vector<LabelMap>& predictions, const std::vector<LabelMap>& ground_truth, int num_classes) {
    if (predictions.size() != ground_truth.size()) {
        fail(ErrorKind::ShapeMismatch, "prediction and ground-truth view counts differ");
    }
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < predictions.size(); ++i) cm.add(ground_truth[i], predictions[i]);
    return miou_from_confusion(cm);
}

Eigen::Vector3d PcaModel::project(std::span<const double> feature) const {
    Eigen::VectorXd x(mean.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = feature[static_cast<std::size_t>(i)] - mean[i];
    return components.transpose() * x;
}

PcaModel pca_fit(const std::vector<const FeatureMap*>& maps) {
    if (maps.empty()) fail(ErrorKind::EmptyInput, "PCA needs at least one feature map");
    const int F = maps.front()->channels;
    std::size_t n = 0;
    for (const auto* m : maps) {
        if (m->channels != F) fail(ErrorKind::ShapeMismatch, "feature maps disagree in channel count");
        n += m->pixels();
    }
    if (n < 3) fail(ErrorKind::EmptyInput, "PCA needs at least 3 pixels");
    PcaModel model;
    model.mean = Eigen::VectorXd::Zero(F);
    for (const auto* m : maps) {
        for (std::size_t p = 0; p < m->pixels(); ++p) {
            const auto f = m->pixel(p);
            for (int c = 0; c < F; ++c) model.mean[c] += f[c];
        }
    }
    model.mean /= static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(F, F);
    Eigen::VectorXd x(F);
    for (const auto* m : maps) {
        for (std::size_t p = 0; p < m->pixels(); ++p) {
            const auto f = m->pixel(p);
            for (int c = 0; c < F; ++c) x[c] = f[c] - model.mean[c];
            cov.selfadjointView<Eigen::Lower>().rankUpdate(x);
        }
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const auto& evals = es.eigenvalues(); // ascending
    const double top = std::max(evals[F - 1], 0.0);
    const double tol = std::max(top, 1e-300) * 1e-10 * F;
    model.components = Eigen::MatrixXd::Zero(F, 3);
    for (int k = 0; k < std::min(3, F); ++k) {
        const double lambda = evals[F - 1 - k];
        if (!(lambda > tol) || top <= 0.0) break;
        Eigen::VectorXd v = es.eigenvectors().col(F - 1 - k);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) v = -v;
        model.components.col(k) = v;
        ++model.rank;
    }
    return model;
}

std::vector<Image> pca_apply(const std::vector<const FeatureMap*>& maps, const PcaModel& model) {
    std::vector<Image> out;
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const auto* m : maps) {
        Image img(m->height, m->width, 3);
        for (std::size_t p = 0; p < m->pixels(); ++p) {
            const Eigen::Vector3d y = model.project(m->pixel(p));
            for (int c = 0; c < 3; ++c) img.data[3 * p + c] = y[c];
            lo = lo.cwiseMin(y);
            hi = hi.cwiseMax(y);
        }
        out.push_back(std::move(img));
    }
    for (auto& img : out) {
        for (std::size_t p = 0; p < img.pixels(); ++p) {
            for (int c = 0; c < 3; ++c) {
                const double range = hi[c] - lo[c];
                double& v = img.data[3 * p + c];
                v = (c < model.rank && range > 0) ? (v - lo[c]) / range : 0.0;
            }
        }
    }
    return out;
}

Image pca_visualize(const FeatureMap& features, bool strict, bool* degenerate) {
    const auto model = pca_fit({&features});
    if (degenerate) *degenerate = model.degenerate();
    if (strict && model.degenerate()) {
        fail(ErrorKind::DegenerateFeatures, "feature covariance has rank " + std::to_string(model.rank));
    }
    return std::move(pca_apply({&features}, model).front());
}

std::vector<Image> pca_visualize_scene(const std::vector<FeatureMap>& maps, bool strict) {
    std::vector<const FeatureMap*> ptrs;
    for (const auto& m : maps) ptrs.push_back(&m);
    const auto model = pca_fit(ptrs);
    if (strict && model.degenerate()) {
        fail(ErrorKind::DegenerateFeatures, "feature covariance has rank " + std::to_string(model.rank));
    }
    return pca_apply(ptrs, model);
}

TimingReport summarize_timings(std::vector<double> ms) {
    TimingReport r;
    r.milliseconds = std::move(ms);
    if (r.milliseconds.empty()) return r;
    r.min = *std::min_element(r.milliseconds.begin(), r.milliseconds.end());
    r.max = *std::max_element(r.milliseconds.begin(), r.milliseconds.end());
    r.mean = std::accumulate(r.milliseconds.begin(), r.milliseconds.end(), 0.0) / r.milliseconds.size();
    return r;
}

TimingReport timing_report(const GaussianCloud& cloud, const std::vector<Camera>& cameras, int threads) {
    std::vector<double> ms;
    if (cameras.empty()) return summarize_timings(ms);
    RenderSettings settings;
    settings.threads = threads;
    render(cloud, cameras.front(), settings);
    for (const auto& cam : cameras) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto out = render(cloud, cam, settings);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return summarize_timings(std::move(ms));
}

} // namespace semsplat
