#include "semsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "semsplat/errors.hpp"
#include "semsplat/parallel.hpp"
#include "semsplat/sh.hpp"

namespace semsplat {

std::vector<double> RenderOutput::weights(std::size_t pixel) const {
    const auto list = contributors(pixel);
    std::vector<double> w;
    w.reserve(list.size());
    double T = 1.0;
    for (const auto& c : list) {
        w.push_back(c.alpha * T);
        T *= 1.0 - c.alpha;
    }
    return w;
}

GradientBundle GradientBundle::zeros_like(const GaussianCloud& cloud) {
    GradientBundle g;
    const std::size_t n = cloud.size();
    g.positions.assign(3 * n, 0.0);
    g.rotations.assign(4 * n, 0.0);
    g.log_scales.assign(3 * n, 0.0);
    g.opacity_logits.assign(n, 0.0);
    g.sh_coeffs.assign(cloud.sh_coeffs.size(), 0.0);
    g.features.assign(cloud.features.size(), 0.0);
    g.mean2d.assign(2 * n, 0.0);
    g.visible.assign(n, 0);
    return g;
}

void GradientBundle::set_zero() {
    for (auto* arr : {&positions, &rotations, &log_scales, &opacity_logits, &sh_coeffs, &features, &mean2d}) {
        std::fill(arr->begin(), arr->end(), 0.0);
    }
    std::fill(visible.begin(), visible.end(), 0);
}

void GradientBundle::add(const GradientBundle& o) {
    auto acc = [](std::vector<double>& a, const std::vector<double>& b) {
        if (a.size() != b.size()) fail(ErrorKind::ShapeMismatch, "gradient bundles differ in shape");
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    acc(positions, o.positions);
    acc(rotations, o.rotations);
    acc(log_scales, o.log_scales);
    acc(opacity_logits, o.opacity_logits);
    acc(sh_coeffs, o.sh_coeffs);
    acc(features, o.features);
    acc(mean2d, o.mean2d);
    for (std::size_t i = 0; i < visible.size(); ++i) visible[i] |= o.visible[i];
}

bool GradientBundle::all_finite() const {
    for (const auto* arr : {&positions, &rotations, &log_scales, &opacity_logits, &sh_coeffs, &features, &mean2d}) {
        for (double v : *arr) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

namespace {

bool mean_in_frustum(const Vec2& mean, const Intrinsics& K) {
    const double hx = 0.5 * K.width, hy = 0.5 * K.height;
    return std::abs(mean.x() - hx) <= 1.3 * hx && std::abs(mean.y() - hy) <= 1.3 * hy;
}

// Inclusive pixel index range whose centers can fall inside the footprint.
struct PixelRect {
    int x0, x1, y0, y1;
    bool empty() const { return x0 > x1 || y0 > y1; }
};

PixelRect footprint_rect(const Projected2DGaussian& s, int width, int height) {
    const double rx = kFootprintSigma * std::sqrt(s.cov2d(0, 0));
    const double ry = kFootprintSigma * std::sqrt(s.cov2d(1, 1));
    PixelRect r;
    r.x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.x() - rx - 0.5)));
    r.x1 = std::min(width - 1, static_cast<int>(std::floor(s.mean2d.x() + rx - 0.5)));
    r.y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.y() - ry - 0.5)));
    r.y1 = std::min(height - 1, static_cast<int>(std::floor(s.mean2d.y() + ry - 0.5)));
    return r;
}

std::vector<PixelRect> footprint_rects(const std::vector<Projected2DGaussian>& splats, int width, int height) {
    std::vector<PixelRect> rects(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) rects[i] = footprint_rect(splats[i], width, height);
    return rects;
}

// Hot fields of one splat, copied per tile for locality.
struct PackedSplat {
    double mx, my, a, b2, c, opacity;
    int x0, x1, y0, y1;
};

PackedSplat pack(const Projected2DGaussian& s, const PixelRect& r) {
    return {s.mean2d.x(), s.mean2d.y(), s.conic[0], 2.0 * s.conic[1], s.conic[2], s.opacity, r.x0, r.x1, r.y0, r.y1};
}

constexpr double kFootprintD2 = kFootprintSigma * kFootprintSigma;

struct TileGrid {
    int tiles_x, tiles_y;
    TileGrid(int width, int height)
        : tiles_x((width + kTileSize - 1) / kTileSize), tiles_y((height + kTileSize - 1) / kTileSize) {}
    std::size_t count() const { return static_cast<std::size_t>(tiles_x) * tiles_y; }
};

// Per-tile splat lists in depth order (CSR layout).
struct TileBins {
    std::vector<std::uint32_t> begin; // tiles + 1
    std::vector<std::uint32_t> splats;
};

TileBins bin_splats(const std::vector<PixelRect>& rects, const TileGrid& grid) {
    TileBins bins;
    bins.begin.assign(grid.count() + 1, 0);
    for (std::size_t i = 0; i < rects.size(); ++i) {
        const auto& r = rects[i];
        if (r.empty()) continue;
        for (int ty = r.y0 / kTileSize; ty <= r.y1 / kTileSize; ++ty) {
            for (int tx = r.x0 / kTileSize; tx <= r.x1 / kTileSize; ++tx) {
                ++bins.begin[static_cast<std::size_t>(ty) * grid.tiles_x + tx + 1];
            }
        }
    }
    std::partial_sum(bins.begin.begin(), bins.begin.end(), bins.begin.begin());
    bins.splats.resize(bins.begin.back());
    std::vector<std::uint32_t> cursor(bins.begin.begin(), bins.begin.end() - 1);
    for (std::size_t i = 0; i < rects.size(); ++i) {
        const auto& r = rects[i];
        if (r.empty()) continue;
        for (int ty = r.y0 / kTileSize; ty <= r.y1 / kTileSize; ++ty) {
            for (int tx = r.x0 / kTileSize; tx <= r.x1 / kTileSize; ++tx) {
                bins.splats[cursor[static_cast<std::size_t>(ty) * grid.tiles_x + tx]++] =
                    static_cast<std::uint32_t>(i);
            }
        }
    }
    return bins;
}

} // namespace

std::vector<Projected2DGaussian> project(const GaussianCloud& cloud, const Camera& camera,
                                         double near) {
    const auto& K = camera.intrinsics;
    const Mat3& W = camera.pose.R;
    const Vec3 cam_center = camera.pose.center();
    std::vector<Projected2DGaussian> out;
    out.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 mu = cloud.position(i);
        const Vec3 pc = world_to_camera(mu, camera.pose);
        if (!(pc.z() > near)) continue;
        const auto proj = camera_to_pixel(pc, K, near);
        if (!mean_in_frustum(proj.pixel, K)) continue;

        const Mat23 T = projection_jacobian(pc, K, near) * W;
        const Mat3 cov3 = covariance_3d(cloud.rotation(i), cloud.log_scale(i));
        Mat2 cov2 = T * cov3 * T.transpose();
        cov2(0, 1) = cov2(1, 0) = 0.5 * (cov2(0, 1) + cov2(1, 0));
        cov2(0, 0) += kLowPassRegularizer;
        cov2(1, 1) += kLowPassRegularizer;
        const double det = cov2.determinant();
        if (!(det >= 1e-12)) {
            fail(ErrorKind::DegenerateCovariance,
                 "projected covariance of point " + std::to_string(i) + " has determinant " +
                     std::to_string(det));
        }

        Projected2DGaussian s;
        s.mean2d = proj.pixel;
        s.cov2d = cov2;
        s.conic = Vec3(cov2(1, 1) / det, -cov2(0, 1) / det, cov2(0, 0) / det);
        s.depth = pc.z();
        const Vec3 dir = (mu - cam_center).normalized();
        s.raw_color = sh_to_raw_color(cloud.sh_degree, cloud.sh(i), dir);
        s.color = s.raw_color.cwiseMax(0.0).cwiseMin(1.0);
        s.feature = cloud.feature(i);
        s.opacity = sigmoid(cloud.opacity_logits[i]);
        s.source_index = static_cast<std::uint32_t>(i);
        out.push_back(s);
    }
    return out;
}

void depth_sort(std::vector<Projected2DGaussian>& splats) {
    // Sort small keys, then permute the (large) splats once.
    struct Key {
        double depth;
        std::uint32_t source, slot;
    };
    std::vector<Key> keys(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        keys[i] = {splats[i].depth, splats[i].source_index, static_cast<std::uint32_t>(i)};
    }
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.source < b.source);
    });
    std::vector<Projected2DGaussian> sorted;
    sorted.reserve(splats.size());
    for (const auto& k : keys) sorted.push_back(splats[k.slot]);
    splats.swap(sorted);
}

double alpha_at(const Projected2DGaussian& splat, const Vec2& pixel) {
    if (!(splat.cov2d.determinant() >= 1e-12)) {
        fail(ErrorKind::DegenerateCovariance, "2D covariance is not invertible");
    }
    const Mat2 inv = splat.cov2d.inverse();
    const Vec2 d = pixel - splat.mean2d;
    const double power = d.dot(inv * d);
    return std::min(kMaxAlpha, splat.opacity * std::exp(-0.5 * power));
}

RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const RenderSettings& settings) {
    const auto& K = camera.intrinsics;
    const int width = K.width, height = K.height;
    const int F = cloud.feature_dim;

    RenderOutput out;
    out.splats = project(cloud, camera, settings.near);
    depth_sort(out.splats);
    out.color_image = Image(height, width, 3);
    out.feature_map = FeatureMap(height, width, F);
    out.alpha_map = Image(height, width, 1);

    const TileGrid grid(width, height);
    const auto rects = footprint_rects(out.splats, width, height);
    const TileBins bins = bin_splats(rects, grid);
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    out.tile_records.assign(grid.count(), {});
    out.pixel_tile.assign(pixels, 0);
    out.pixel_begin.assign(pixels, 0);
    out.pixel_count.assign(pixels, 0);

    const double threshold = settings.early_termination ? settings.termination_threshold : -1.0;
    parallel_for(settings.threads, grid.count(), [&](int, std::size_t tile) {
        const int tx = static_cast<int>(tile % grid.tiles_x);
        const int ty = static_cast<int>(tile / grid.tiles_x);
        auto& records = out.tile_records[tile];
        const std::uint32_t* list = bins.splats.data() + bins.begin[tile];
        const std::size_t list_size = bins.begin[tile + 1] - bins.begin[tile];
        thread_local std::vector<PackedSplat> packed;
        packed.resize(list_size);
        // Per pixel row of the tile, the splats whose footprint spans it, in depth order.
        thread_local std::vector<std::vector<std::uint32_t>> rows(kTileSize);
        for (auto& r : rows) r.clear();
        const int y_begin = ty * kTileSize, y_end = std::min(height, (ty + 1) * kTileSize);
        for (std::size_t k = 0; k < list_size; ++k) {
            packed[k] = pack(out.splats[list[k]], rects[list[k]]);
            const int r0 = std::max(packed[k].y0, y_begin), r1 = std::min(packed[k].y1, y_end - 1);
            for (int y = r0; y <= r1; ++y) rows[static_cast<std::size_t>(y - y_begin)].push_back(static_cast<std::uint32_t>(k));
        }
        for (int y = y_begin; y < y_end; ++y) {
            const auto& row = rows[static_cast<std::size_t>(y - y_begin)];
            for (int x = tx * kTileSize; x < std::min(width, (tx + 1) * kTileSize); ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * width + x;
                out.pixel_tile[p] = static_cast<std::uint32_t>(tile);
                out.pixel_begin[p] = static_cast<std::uint32_t>(records.size());
                const double px = x + 0.5, py = y + 0.5;
                double T = 1.0;
                double* color = &out.color_image.data[3 * p];
                double* feat = &out.feature_map.data[static_cast<std::size_t>(F) * p];
                for (const std::uint32_t k : row) {
                    const auto& q = packed[k];
                    if (x < q.x0 || x > q.x1) continue;
                    const double dx = px - q.mx, dy = py - q.my;
                    const double power = q.a * dx * dx + q.b2 * dx * dy + q.c * dy * dy;
                    if (power > kFootprintD2) continue;
                    const double alpha = std::min(kMaxAlpha, q.opacity * std::exp(-0.5 * power));
                    const double w = alpha * T;
                    const auto& s = out.splats[list[k]];
                    for (int c = 0; c < 3; ++c) color[c] += w * s.color[c];
                    const double* f = s.feature.data();
                    for (int c = 0; c < F; ++c) feat[c] += w * f[c];
                    records.push_back({list[k], alpha});
                    T *= 1.0 - alpha;
                    if (T < threshold) break;
                }
                out.pixel_count[p] = static_cast<std::uint32_t>(records.size()) - out.pixel_begin[p];
                out.alpha_map.data[p] = 1.0 - T;
            }
        }
    });
    return out;
}

namespace {

// Per-splat screen-space adjoints accumulated over pixels.
struct SplatAdjoint {
    double mean[2];
    double conic[3];
    double opacity;
    double color[3];
};

void check_adjoint(const Tensor3<double>& adj, int height, int width, int channels, const char* what) {
    if (adj.empty()) return;
    if (adj.height != height || adj.width != width || adj.channels != channels) {
        fail(ErrorKind::ShapeMismatch, std::string(what) + " adjoint shape disagrees with the render output");
    }
}

} // namespace

GradientBundle render_backward(const GaussianCloud& cloud, const Camera& camera,
                               const RenderOutput& output, const Image& d_color,
                               const FeatureMap& d_feature, const RenderSettings& settings) {
    GradientBundle grads = GradientBundle::zeros_like(cloud);
    render_backward_into(cloud, camera, output, d_color, d_feature, settings, grads);
    return grads;
}

void render_backward_into(const GaussianCloud& cloud, const Camera& camera,
                          const RenderOutput& output, const Image& d_color,
                          const FeatureMap& d_feature, const RenderSettings& settings,
                          GradientBundle& grads) {
    const auto& K = camera.intrinsics;
    const int width = K.width, height = K.height;
    const int F = cloud.feature_dim;
    check_adjoint(d_color, height, width, 3, "color");
    check_adjoint(d_feature, height, width, F, "feature");
    if (output.color_image.height != height || output.color_image.width != width ||
        output.feature_map.channels != F) {
        fail(ErrorKind::ShapeMismatch, "render output does not belong to this cloud/view");
    }
    if (grads.opacity_logits.size() != cloud.size() || grads.features.size() != cloud.features.size()) {
        fail(ErrorKind::ShapeMismatch, "gradient bundle is not shaped like the cloud");
    }
    const bool has_color = !d_color.empty();
    const bool has_feature = !d_feature.empty();
    const std::size_t num_splats = output.splats.size();
    const TileGrid grid(width, height);
    const int workers = effective_workers(settings.threads, grid.count());

    // Channels are color then features, packed per depth-sorted splat.
    const std::size_t C = 3 + static_cast<std::size_t>(F);
    std::vector<double> values(num_splats * C);
    for (std::size_t k = 0; k < num_splats; ++k) {
        const auto& s = output.splats[k];
        for (int c = 0; c < 3; ++c) values[k * C + c] = s.color[c];
        std::copy(s.feature.begin(), s.feature.end(), values.begin() + static_cast<std::ptrdiff_t>(k * C + 3));
    }

    // Partial per-worker adjoints; reduced in worker order afterwards.
    std::vector<std::vector<SplatAdjoint>> screen(static_cast<std::size_t>(workers),
                                                  std::vector<SplatAdjoint>(num_splats, SplatAdjoint{}));
    std::vector<std::vector<double>> value_adj(static_cast<std::size_t>(workers),
                                               std::vector<double>(num_splats * C, 0.0));

    parallel_for(workers, grid.count(), [&](int worker, std::size_t tile) {
        auto& adj = screen[static_cast<std::size_t>(worker)];
        auto& vadj = value_adj[static_cast<std::size_t>(worker)];
        std::vector<double> prefix_T;
        std::vector<double> suffix(C), g(C);
        const int tx = static_cast<int>(tile % grid.tiles_x);
        const int ty = static_cast<int>(tile / grid.tiles_x);
        for (int y = ty * kTileSize; y < std::min(height, (ty + 1) * kTileSize); ++y) {
            for (int x = tx * kTileSize; x < std::min(width, (tx + 1) * kTileSize); ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * width + x;
                const auto list = output.contributors(p);
                if (list.empty()) continue;
                for (int c = 0; c < 3; ++c) g[c] = has_color ? d_color.data[3 * p + c] : 0.0;
                for (int c = 0; c < F; ++c) {
                    g[3 + c] = has_feature ? d_feature.data[static_cast<std::size_t>(F) * p + c] : 0.0;
                }
                prefix_T.resize(list.size());
                double T = 1.0;
                for (std::size_t i = 0; i < list.size(); ++i) {
                    prefix_T[i] = T;
                    T *= 1.0 - list[i].alpha;
                }
                std::fill(suffix.begin(), suffix.end(), 0.0);
                const double px = x + 0.5, py = y + 0.5;
                for (std::size_t ii = list.size(); ii-- > 0;) {
                    const auto& rec = list[ii];
                    const double alpha = rec.alpha;
                    const double Ti = prefix_T[ii];
                    const double w = alpha * Ti;
                    const double inv_one_minus = 1.0 / (1.0 - alpha);
                    const double* v = &values[rec.splat * C];
                    double* va = &vadj[rec.splat * C];
                    double d_alpha = 0.0;
                    for (std::size_t c = 0; c < C; ++c) {
                        va[c] += w * g[c];
                        d_alpha += g[c] * (v[c] * Ti - suffix[c] * inv_one_minus);
                        suffix[c] += v[c] * w;
                    }
                    if (alpha >= kMaxAlpha) continue; // clamp engaged: no gradient
                    const auto& s = output.splats[rec.splat];
                    auto& a = adj[rec.splat];
                    const double dx = px - s.mean2d.x(), dy = py - s.mean2d.y();
                    const double gauss = alpha / s.opacity;
                    a.opacity += d_alpha * gauss;
                    const double d_power = -0.5 * d_alpha * s.opacity * gauss;
                    a.mean[0] += -d_power * (2.0 * s.conic[0] * dx + 2.0 * s.conic[1] * dy);
                    a.mean[1] += -d_power * (2.0 * s.conic[1] * dx + 2.0 * s.conic[2] * dy);
                    a.conic[0] += d_power * dx * dx;
                    a.conic[1] += d_power * 2.0 * dx * dy;
                    a.conic[2] += d_power * dy * dy;
                }
            }
        }
    });
    for (int w = 1; w < workers; ++w) {
        auto& dst = screen[0];
        const auto& src = screen[static_cast<std::size_t>(w)];
        for (std::size_t i = 0; i < num_splats; ++i) {
            for (int k = 0; k < 2; ++k) dst[i].mean[k] += src[i].mean[k];
            for (int k = 0; k < 3; ++k) dst[i].conic[k] += src[i].conic[k];
            dst[i].opacity += src[i].opacity;
        }
        for (std::size_t i = 0; i < value_adj[0].size(); ++i) value_adj[0][i] += value_adj[static_cast<std::size_t>(w)][i];
    }
    for (std::size_t k = 0; k < num_splats; ++k) {
        for (int c = 0; c < 3; ++c) screen[0][k].color[c] = value_adj[0][k * C + c];
    }

    // Per-point chain rule back to the cloud parameters.
    const Mat3& Wr = camera.pose.R;
    const Vec3 cam_center = camera.pose.center();
    const int sh_count = sh_basis_count(cloud.sh_degree);
    const auto sh_stride = static_cast<std::size_t>(cloud.sh_stride());
    for (std::size_t k = 0; k < num_splats; ++k) {
        const auto& s = output.splats[k];
        const auto& a = screen[0][k];
        const std::size_t i = s.source_index;
        grads.visible[i] = 1;
        // Every gradient below is linear in the splat's adjoints.
        bool touched = a.opacity != 0.0 || a.mean[0] != 0.0 || a.mean[1] != 0.0 || a.conic[0] != 0.0 ||
                       a.conic[1] != 0.0 || a.conic[2] != 0.0;
        for (std::size_t c = 0; c < C && !touched; ++c) touched = value_adj[0][k * C + c] != 0.0;
        if (!touched) continue;

        if (has_feature) {
            for (int c = 0; c < F; ++c) grads.features[i * F + c] += value_adj[0][k * C + 3 + c];
        }
        const double sigma = s.opacity;
        grads.opacity_logits[i] += a.opacity * sigma * (1.0 - sigma);

        // Color through the clamp and SH evaluation.
        const Vec3 mu = cloud.position(i);
        const Vec3 view = mu - cam_center;
        const double view_norm = view.norm();
        const Vec3 dir = view / view_norm;
        Vec3 d_raw = Vec3::Zero();
        for (int c = 0; c < 3; ++c) {
            if (s.raw_color[c] > 0.0 && s.raw_color[c] < 1.0) d_raw[c] = a.color[c];
        }
        Vec3 d_mu = Vec3::Zero();
        if (!d_raw.isZero(0.0)) {
            double basis[16];
            sh_basis(cloud.sh_degree, dir, basis);
            double* gsh = &grads.sh_coeffs[i * sh_stride];
            const auto coeffs = cloud.sh(i);
            for (int b = 0; b < sh_count; ++b) {
                for (int c = 0; c < 3; ++c) gsh[3 * b + c] += basis[b] * d_raw[c];
            }
            if (cloud.sh_degree > 0) {
                double dbasis[48];
                sh_basis_gradient(cloud.sh_degree, dir, dbasis);
                Vec3 d_dir = Vec3::Zero();
                for (int b = 1; b < sh_count; ++b) {
                    double proj = 0.0;
                    for (int c = 0; c < 3; ++c) proj += coeffs[3 * b + c] * d_raw[c];
                    for (int ax = 0; ax < 3; ++ax) d_dir[ax] += dbasis[3 * b + ax] * proj;
                }
                d_mu += (d_dir - dir * dir.dot(d_dir)) / view_norm;
            }
        }

        // Conic -> 2D covariance: dL/dSigma = -Q G Q with G symmetric.
        const Mat2 Q = (Mat2() << s.conic[0], s.conic[1], s.conic[1], s.conic[2]).finished();
        const Mat2 Gq = (Mat2() << a.conic[0], 0.5 * a.conic[1], 0.5 * a.conic[1], a.conic[2]).finished();
        const Mat2 G2 = -Q * Gq * Q;

        const Vec3 pc = world_to_camera(mu, camera.pose);
        const Mat23 J = projection_jacobian(pc, K, settings.near);
        const Mat23 T = J * Wr;
        const Vec4 q = cloud.rotation(i);
        const double q_norm = q.norm();
        const Vec4 qn = q / q_norm;
        const Mat3 R = quaternion_to_rotation(q);
        const Vec3 log_s = cloud.log_scale(i);
        const Vec3 scale = activate_scale(log_s);
        const Mat3 M = R * scale.asDiagonal();
        const Mat3 cov3 = M * M.transpose();

        const Mat3 G3 = T.transpose() * G2 * T;
        const Mat23 dT = 2.0 * G2 * T * cov3;
        const Mat23 dJ = dT * Wr.transpose();

        // Sigma3 = M M^T.
        const Mat3 dM = 2.0 * G3 * M;
        for (int ax = 0; ax < 3; ++ax) {
            const double ds = dM.col(ax).dot(R.col(ax));
            if (log_s[ax] > kMinLogScale && log_s[ax] < kMaxLogScale) {
                grads.log_scales[3 * i + ax] += ds * scale[ax];
            }
        }
        const Mat3 dR = dM * scale.asDiagonal().toDenseMatrix();
        const double w = qn[0], x = qn[1], y = qn[2], z = qn[3];
        Vec4 dq;
        dq[0] = 2 * (-z * dR(0, 1) + y * dR(0, 2) + z * dR(1, 0) - x * dR(1, 2) - y * dR(2, 0) + x * dR(2, 1));
        dq[1] = 2 * (y * dR(0, 1) + z * dR(0, 2) + y * dR(1, 0) - 2 * x * dR(1, 1) - w * dR(1, 2) +
                     z * dR(2, 0) + w * dR(2, 1) - 2 * x * dR(2, 2));
        dq[2] = 2 * (-2 * y * dR(0, 0) + x * dR(0, 1) + w * dR(0, 2) + x * dR(1, 0) + z * dR(1, 2) -
                     w * dR(2, 0) + z * dR(2, 1) - 2 * y * dR(2, 2));
        dq[3] = 2 * (-2 * z * dR(0, 0) - w * dR(0, 1) + x * dR(0, 2) + w * dR(1, 0) - 2 * z * dR(1, 1) +
                     y * dR(1, 2) + x * dR(2, 0) + y * dR(2, 1));
        const Vec4 dq_raw = (dq - qn * qn.dot(dq)) / q_norm;
        for (int c = 0; c < 4; ++c) grads.rotations[4 * i + c] += dq_raw[c];

        // Jacobian and mean projection -> camera-space position.
        const double inv_z = 1.0 / pc.z();
        const double inv_z2 = inv_z * inv_z;
        const double inv_z3 = inv_z2 * inv_z;
        Vec3 d_pc;
        d_pc.x() = dJ(0, 2) * (-K.fx * inv_z2) + a.mean[0] * K.fx * inv_z;
        d_pc.y() = dJ(1, 2) * (-K.fy * inv_z2) + a.mean[1] * K.fy * inv_z;
        d_pc.z() = dJ(0, 0) * (-K.fx * inv_z2) + dJ(0, 2) * (2.0 * K.fx * pc.x() * inv_z3) +
                   dJ(1, 1) * (-K.fy * inv_z2) + dJ(1, 2) * (2.0 * K.fy * pc.y() * inv_z3) -
                   a.mean[0] * K.fx * pc.x() * inv_z2 - a.mean[1] * K.fy * pc.y() * inv_z2;
        d_mu += Wr.transpose() * d_pc;
        for (int c = 0; c < 3; ++c) grads.positions[3 * i + c] += d_mu[c];
        grads.mean2d[2 * i] += a.mean[0];
        grads.mean2d[2 * i + 1] += a.mean[1];
    }
}

} // namespace semsplat
