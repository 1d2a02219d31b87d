#include "semsplat/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "semsplat/errors.hpp"
#include "semsplat/random.hpp"

namespace semsplat {

void LossWeights::validate() const {
    if (!(a >= 0.0) || !(b >= 0.0)) fail(ErrorKind::ConfigError, "loss weights must be non-negative");
}

TensorLoss l1_loss(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "l1_loss");
    TensorLoss out;
    out.adjoint = Tensor3<double>(rendered.height, rendered.width, rendered.channels);
    const std::size_t n = rendered.data.size();
    if (n == 0) return out;
    const double inv = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rendered.data[i] - target.data[i];
        sum += std::abs(d);
        out.adjoint.data[i] = d > 0 ? inv : (d < 0 ? -inv : 0.0);
    }
    out.value = sum * inv;
    return out;
}

namespace {

std::array<double, kSsimWindow> gaussian_window() {
    std::array<double, kSsimWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// Valid-mode separable filtering of a single-channel H x W plane into an
// (H - 10) x (W - 10) plane.
void filter_valid(const std::vector<double>& in, int h, int w, const std::array<double, kSsimWindow>& g,
                  std::vector<double>& tmp, std::vector<double>& out) {
    const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
    tmp.assign(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < h; ++y) {
        const double* row = &in[static_cast<std::size_t>(y) * w];
        double* dst = &tmp[static_cast<std::size_t>(y) * ow];
        for (int k = 0; k < kSsimWindow; ++k) {
            const double gk = g[k];
            for (int x = 0; x < ow; ++x) dst[x] += gk * row[x + k];
        }
    }
    out.assign(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y) {
        double* dst = &out[static_cast<std::size_t>(y) * ow];
        for (int k = 0; k < kSsimWindow; ++k) {
            const double gk = g[k];
            const double* src = &tmp[static_cast<std::size_t>(y + k) * ow];
            for (int x = 0; x < ow; ++x) dst[x] += gk * src[x];
        }
    }
}

// Adjoint of filter_valid: scatters an (H - 10) x (W - 10) plane back to H x W.
void filter_valid_adjoint(const std::vector<double>& in, int h, int w, const std::array<double, kSsimWindow>& g,
                          std::vector<double>& tmp, std::vector<double>& out) {
    const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
    tmp.assign(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < oh; ++y) {
        const double* src = &in[static_cast<std::size_t>(y) * ow];
        for (int k = 0; k < kSsimWindow; ++k) {
            const double gk = g[k];
            double* dst = &tmp[static_cast<std::size_t>(y + k) * ow];
            for (int x = 0; x < ow; ++x) dst[x] += gk * src[x];
        }
    }
    out.assign(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y) {
        const double* src = &tmp[static_cast<std::size_t>(y) * ow];
        double* row = &out[static_cast<std::size_t>(y) * w];
        for (int k = 0; k < kSsimWindow; ++k) {
            const double gk = g[k];
            for (int x = 0; x < ow; ++x) row[x + k] += gk * src[x];
        }
    }
}

} // namespace

TensorLoss dssim_loss(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "dssim_loss");
    const int h = rendered.height, w = rendered.width, C = rendered.channels;
    if (h < kSsimWindow || w < kSsimWindow) {
        fail(ErrorKind::ImageTooSmall, "SSIM needs at least " + std::to_string(kSsimWindow) + "x" +
                                           std::to_string(kSsimWindow) + " pixels, got " +
                                           std::to_string(w) + "x" + std::to_string(h));
    }
    const auto g = gaussian_window();
    const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
    const std::size_t P = static_cast<std::size_t>(h) * w, Q = static_cast<std::size_t>(oh) * ow;
    const double dLdS = -0.5 / (static_cast<double>(Q) * C);

    TensorLoss out;
    out.adjoint = Tensor3<double>(h, w, C);
    std::vector<double> x(P), y(P), xx(P), yy(P), xy(P), tmp;
    std::vector<double> mx, my, exx, eyy, exy;
    std::vector<double> g_mx(Q), g_exx(Q), g_exy(Q), back;
    double ssim_sum = 0.0;
    for (int c = 0; c < C; ++c) {
        for (std::size_t p = 0; p < P; ++p) {
            x[p] = rendered.data[p * C + c];
            y[p] = target.data[p * C + c];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        filter_valid(x, h, w, g, tmp, mx);
        filter_valid(y, h, w, g, tmp, my);
        filter_valid(xx, h, w, g, tmp, exx);
        filter_valid(yy, h, w, g, tmp, eyy);
        filter_valid(xy, h, w, g, tmp, exy);
        for (std::size_t q = 0; q < Q; ++q) {
            const double ux = mx[q], uy = my[q];
            const double n1 = 2.0 * ux * uy + kSsimC1;
            const double n2 = 2.0 * (exy[q] - ux * uy) + kSsimC2;
            const double d1 = ux * ux + uy * uy + kSsimC1;
            const double d2 = (exx[q] - ux * ux) + (eyy[q] - uy * uy) + kSsimC2;
            const double s = n1 * n2 / (d1 * d2);
            ssim_sum += s;
            g_exy[q] = dLdS * 2.0 * n1 / (d1 * d2);
            g_exx[q] = dLdS * (-s / d2);
            g_mx[q] = dLdS * s * (2.0 * uy / n1 - 2.0 * uy / n2 - 2.0 * ux / d1 + 2.0 * ux / d2);
        }
        filter_valid_adjoint(g_mx, h, w, g, tmp, back);
        for (std::size_t p = 0; p < P; ++p) out.adjoint.data[p * C + c] = back[p];
        filter_valid_adjoint(g_exx, h, w, g, tmp, back);
        for (std::size_t p = 0; p < P; ++p) out.adjoint.data[p * C + c] += 2.0 * x[p] * back[p];
        filter_valid_adjoint(g_exy, h, w, g, tmp, back);
        for (std::size_t p = 0; p < P; ++p) out.adjoint.data[p * C + c] += y[p] * back[p];
    }
    out.value = 0.5 * (1.0 - ssim_sum / (static_cast<double>(Q) * C));
    return out;
}

namespace {

// Softmax cross-entropy of one row; writes the scaled gradient into grad.
double ce_row(const double* logits, int C, int label, double scale, double* grad) {
    double mx = logits[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, logits[c]);
    double sum = 0.0;
    for (int c = 0; c < C; ++c) sum += std::exp(logits[c] - mx);
    const double lse = mx + std::log(sum);
    for (int c = 0; c < C; ++c) grad[c] = scale * std::exp(logits[c] - lse);
    grad[label] -= scale;
    return lse - logits[label];
}

void check_label(std::uint8_t label, int C) {
    if (label != kIgnoreLabel && label >= C) {
        fail(ErrorKind::LabelOutOfRange,
             "label " + std::to_string(label) + " outside [0, " + std::to_string(C) + ")");
    }
}

} // namespace

TensorLoss ce_loss(const Tensor3<double>& logits, const LabelMap& labels, const LabelMap* mask) {
    if (labels.height != logits.height || labels.width != logits.width || labels.channels != 1) {
        fail(ErrorKind::ShapeMismatch, "ce_loss: label map does not match logits");
    }
    if (mask && !mask->same_shape(labels)) fail(ErrorKind::ShapeMismatch, "ce_loss: mask does not match labels");
    const int C = logits.channels;
    const std::size_t P = logits.pixels();
    TensorLoss out;
    out.adjoint = Tensor3<double>(logits.height, logits.width, C);
    std::size_t count = 0;
    for (std::size_t p = 0; p < P; ++p) {
        check_label(labels.data[p], C);
        if (labels.data[p] == kIgnoreLabel || (mask && mask->data[p] == 0)) continue;
        ++count;
    }
    if (count == 0) return out;
    const double scale = 1.0 / static_cast<double>(count);
    double sum = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        if (labels.data[p] == kIgnoreLabel || (mask && mask->data[p] == 0)) continue;
        sum += ce_row(&logits.data[p * C], C, labels.data[p], scale, &out.adjoint.data[p * C]);
    }
    out.value = sum * scale;
    return out;
}

double ce_loss_rows(const RowMatrix& logits, std::span<const std::uint8_t> labels, RowMatrix& d_logits) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
        fail(ErrorKind::ShapeMismatch, "ce_loss_rows: one label per row required");
    }
    const int C = static_cast<int>(logits.cols());
    d_logits = RowMatrix::Zero(logits.rows(), logits.cols());
    std::size_t count = 0;
    for (auto l : labels) {
        check_label(l, C);
        if (l != kIgnoreLabel) ++count;
    }
    if (count == 0) return 0.0;
    const double scale = 1.0 / static_cast<double>(count);
    double sum = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        if (labels[r] == kIgnoreLabel) continue;
        sum += ce_row(logits.row(r).data(), C, labels[r], scale, d_logits.row(r).data());
    }
    return sum * scale;
}

void softmax(std::span<const double> logits, std::span<double> out) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
}

namespace {

// Log-probabilities and probabilities of one softmax.
struct Distribution {
    std::vector<double> log_p, p;
};

void set_distribution(std::span<const double> v, Distribution& d) {
    const std::size_t n = v.size();
    d.log_p.resize(n);
    d.p.resize(n);
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d.p[i] = std::exp(v[i] - mx);
        sum += d.p[i];
    }
    const double log_sum = std::log(sum);
    for (std::size_t i = 0; i < n; ++i) {
        d.log_p[i] = v[i] - mx - log_sum;
        d.p[i] /= sum;
    }
}

double distribution_kl(const Distribution& a, const Distribution& b, double scale, std::span<double> da,
                       std::span<double> db) {
    const std::size_t n = a.p.size();
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) kl += a.p[i] * (a.log_p[i] - b.log_p[i]);
    if (!da.empty()) {
        for (std::size_t i = 0; i < n; ++i) da[i] += scale * a.p[i] * (a.log_p[i] - b.log_p[i] - kl);
    }
    if (!db.empty()) {
        for (std::size_t i = 0; i < n; ++i) db[i] += scale * (b.p[i] - a.p[i]);
    }
    return kl;
}

} // namespace

double softmax_kl(std::span<const double> a, std::span<const double> b, double scale, std::span<double> da,
                  std::span<double> db) {
    thread_local Distribution pa, pb;
    set_distribution(a, pa);
    set_distribution(b, pb);
    return distribution_kl(pa, pb, scale, da, db);
}

GridNeighbors::GridNeighbors(int height, int width, int k) : height_(height), width_(width), k_(k) {
    // A full disc of radius r holds about pi r^2 pixels; a corner anchor sees a quarter of it.
    const int r = static_cast<int>(std::ceil(std::sqrt(4.0 * (k + 1) / 3.14159) + 1.0));
    radius2_ = static_cast<long long>(r) * r;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            if ((dy == 0 && dx == 0) || dy * dy + dx * dx > radius2_) continue;
            offsets_.push_back({dy, dx});
        }
    }
    std::sort(offsets_.begin(), offsets_.end(), [](const Offset& a, const Offset& b) {
        const int da = a.dy * a.dy + a.dx * a.dx, db = b.dy * b.dy + b.dx * b.dx;
        if (da != db) return da < db;
        return a.dy != b.dy ? a.dy < b.dy : a.dx < b.dx;
    });
}

void GridNeighbors::query(int y, int x, std::vector<std::size_t>& out) const {
    out.clear();
    for (const auto& o : offsets_) {
        const int ny = y + o.dy, nx = x + o.dx;
        if (ny < 0 || ny >= height_ || nx < 0 || nx >= width_) continue;
        out.push_back(static_cast<std::size_t>(ny) * width_ + nx);
        if (static_cast<int>(out.size()) == k_) return;
    }
    // Tiny images: fall back to an exhaustive scan.
    std::vector<std::pair<long long, std::size_t>> all;
    for (int ny = 0; ny < height_; ++ny) {
        for (int nx = 0; nx < width_; ++nx) {
            if (ny == y && nx == x) continue;
            const long long d = static_cast<long long>(ny - y) * (ny - y) + static_cast<long long>(nx - x) * (nx - x);
            all.emplace_back(d, static_cast<std::size_t>(ny) * width_ + nx);
        }
    }
    std::sort(all.begin(), all.end());
    out.clear();
    for (int i = 0; i < k_ && i < static_cast<int>(all.size()); ++i) out.push_back(all[i].second);
}

TensorLoss agg2d_loss(const FeatureMap& features, int m, int k, std::uint64_t seed) {
    const long long pixels = static_cast<long long>(features.pixels());
    if (m < 1 || k < 1 || static_cast<long long>(m) * (k + 1) > pixels) {
        fail(ErrorKind::InvalidSampleCount, "agg2d needs m >= 1, k >= 1 and m * (k + 1) <= H * W (m=" +
                                                std::to_string(m) + ", k=" + std::to_string(k) +
                                                ", pixels=" + std::to_string(pixels) + ")");
    }
    const int F = features.channels;
    TensorLoss out;
    out.adjoint = Tensor3<double>(features.height, features.width, F);
    Rng rng(seed);
    const auto anchors = rng.sample_without_replacement(static_cast<std::size_t>(pixels), static_cast<std::size_t>(m));
    const GridNeighbors grid(features.height, features.width, k);
    const double scale = 1.0 / (static_cast<double>(m) * k);
    std::vector<std::size_t> nb;
    Distribution pa, pb;
    double sum = 0.0;
    for (std::size_t a : anchors) {
        grid.query(static_cast<int>(a / features.width), static_cast<int>(a % features.width), nb);
        set_distribution(features.pixel(a), pa);
        for (std::size_t j : nb) {
            set_distribution(features.pixel(j), pb);
            sum += distribution_kl(pa, pb, scale, out.adjoint.pixel(a), out.adjoint.pixel(j));
        }
    }
    out.value = sum * scale;
    return out;
}

PointFeatureLoss agg3d_loss(const GaussianCloud& cloud, const SpatialIndex& index, int m, int k,
                            std::uint64_t seed) {
    const std::size_t n = cloud.size();
    if (k < 1 || n <= static_cast<std::size_t>(k)) {
        fail(ErrorKind::TooFewPoints, "agg3d needs more than k=" + std::to_string(k) + " points, have " +
                                          std::to_string(n));
    }
    if (m < 1) fail(ErrorKind::InvalidSampleCount, "agg3d needs m >= 1");
    if (index.size() != n) fail(ErrorKind::ShapeMismatch, "spatial index does not cover the cloud");
    const auto F = static_cast<std::size_t>(cloud.feature_dim);
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(m), n);
    PointFeatureLoss out;
    out.d_features.assign(cloud.features.size(), 0.0);
    Rng rng(seed);
    const auto anchors = rng.sample_without_replacement(n, count);
    const double scale = 1.0 / (static_cast<double>(count) * k);
    std::vector<std::size_t> nb;
    std::vector<double> d2;
    Distribution pa, pb;
    double sum = 0.0;
    for (std::size_t a : anchors) {
        index.knn(index.point(a), static_cast<std::size_t>(k), a, nb, d2);
        set_distribution(cloud.feature(a), pa);
        std::span<double> ga(out.d_features.data() + a * F, F);
        for (std::size_t j : nb) {
            set_distribution(cloud.feature(j), pb);
            sum += distribution_kl(pa, pb, scale, ga, std::span<double>(out.d_features.data() + j * F, F));
        }
    }
    out.value = sum * scale;
    return out;
}

LossReport total_loss(const LossReport& parts, const LossWeights& weights) {
    LossReport r = parts;
    r.total = parts.l1 + parts.dssim + parts.ce + weights.a * parts.agg2d + weights.b * parts.agg3d;
    for (double v : {r.l1, r.dssim, r.ce, r.agg2d, r.agg3d, r.total}) {
        if (!std::isfinite(v)) fail(ErrorKind::NonFiniteLoss, "loss component is not finite");
    }
    return r;
}

} // namespace semsplat
