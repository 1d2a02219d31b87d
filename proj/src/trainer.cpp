#include "semsplat/trainer.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <string>

#include "semsplat/checkpoint.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/random.hpp"

namespace semsplat {

bool LearningRates::all_zero() const {
    return positions == 0 && rotations == 0 && log_scales == 0 && opacity == 0 && sh == 0 && features == 0 &&
           decoder == 0;
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) fail(ErrorKind::ConfigError, what);
    };
    require(total_steps >= 0, "total_steps must be non-negative");
    require(densify_interval > 0, "densify_interval must be positive");
    require(max_points > 0 && max_points <= kMaxPoints, "max_points must lie in [1, 300000]");
    require(ratio_gt >= 0 && ratio_pseudo >= 0 && ratio_gt + ratio_pseudo > 0, "sampling ratio must be positive");
    require(k > 0, "k must be positive");
    require(agg2d_samples > 0 && agg3d_samples > 0, "sample counts must be positive");
    weights.validate();
    for (double lr_value : {lr.positions, lr.rotations, lr.log_scales, lr.opacity, lr.sh, lr.features, lr.decoder}) {
        require(lr_value >= 0 && std::isfinite(lr_value), "learning rates must be finite and non-negative");
    }
    require(lr.positions_final_factor > 0, "positions_final_factor must be positive");
    require(std::isfinite(tau_grad), "tau_grad must be finite");
    require(eps_prune >= 0 && eps_prune < 1, "eps_prune must lie in [0, 1)");
    require(split_divisor > 1, "split_divisor must exceed 1");
    require(split_extent_fraction > 0, "split_extent_fraction must be positive");
    require(sh_degree >= 0 && sh_degree <= 3, "sh_degree must lie in [0, 3]");
    require(feature_dim > 0, "feature_dim must be positive");
    require(hidden_dim >= 0, "hidden_dim must be non-negative");
    require(threads >= 1, "threads must be at least 1");
    require(log_interval > 0, "log_interval must be positive");
}

nlohmann::json TrainConfig::to_json() const {
    return {
        {"total_steps", total_steps},
        {"densify_interval", densify_interval},
        {"max_points", max_points},
        {"ratio_gt", ratio_gt},
        {"ratio_pseudo", ratio_pseudo},
        {"k", k},
        {"agg2d_samples", agg2d_samples},
        {"agg3d_samples", agg3d_samples},
        {"loss_weights", {{"a", weights.a}, {"b", weights.b}}},
        {"lr",
         {{"positions", lr.positions},
          {"positions_final_factor", lr.positions_final_factor},
          {"rotations", lr.rotations},
          {"log_scales", lr.log_scales},
          {"opacity", lr.opacity},
          {"sh", lr.sh},
          {"features", lr.features},
          {"decoder", lr.decoder}}},
        {"seed", seed},
        {"tau_grad", tau_grad},
        {"eps_prune", eps_prune},
        {"split_divisor", split_divisor},
        {"split_extent_fraction", split_extent_fraction},
        {"use_pseudo", use_pseudo},
        {"sh_degree", sh_degree},
        {"feature_dim", feature_dim},
        {"hidden_dim", hidden_dim},
        {"threads", threads},
        {"log_interval", log_interval},
    };
}

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, std::set<std::string>& seen) {
    if (!j.contains(key)) return;
    seen.insert(key);
    try {
        out = j.at(key).get<T>();
    } catch (const std::exception& e) {
        fail(ErrorKind::ConfigError, std::string("config key '") + key + "': " + e.what());
    }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& seen, const std::string& where) {
    for (const auto& item : j.items()) {
        if (!seen.count(item.key())) fail(ErrorKind::ConfigError, "unknown config key '" + where + item.key() + "'");
    }
}

} // namespace

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::ConfigError, "config must be a JSON object");
    TrainConfig c;
    std::set<std::string> seen;
    read_key(j, "total_steps", c.total_steps, seen);
    read_key(j, "densify_interval", c.densify_interval, seen);
    read_key(j, "max_points", c.max_points, seen);
    read_key(j, "ratio_gt", c.ratio_gt, seen);
    read_key(j, "ratio_pseudo", c.ratio_pseudo, seen);
    read_key(j, "k", c.k, seen);
    read_key(j, "agg2d_samples", c.agg2d_samples, seen);
    read_key(j, "agg3d_samples", c.agg3d_samples, seen);
    read_key(j, "seed", c.seed, seen);
    read_key(j, "tau_grad", c.tau_grad, seen);
    read_key(j, "eps_prune", c.eps_prune, seen);
    read_key(j, "split_divisor", c.split_divisor, seen);
    read_key(j, "split_extent_fraction", c.split_extent_fraction, seen);
    read_key(j, "use_pseudo", c.use_pseudo, seen);
    read_key(j, "sh_degree", c.sh_degree, seen);
    read_key(j, "feature_dim", c.feature_dim, seen);
    read_key(j, "hidden_dim", c.hidden_dim, seen);
    read_key(j, "threads", c.threads, seen);
    read_key(j, "log_interval", c.log_interval, seen);
    if (j.contains("loss_weights")) {
        seen.insert("loss_weights");
        const auto& w = j["loss_weights"];
        std::set<std::string> ws;
        read_key(w, "a", c.weights.a, ws);
        read_key(w, "b", c.weights.b, ws);
        reject_unknown(w, ws, "loss_weights.");
    }
    if (j.contains("lr")) {
        seen.insert("lr");
        const auto& l = j["lr"];
        std::set<std::string> ls;
        read_key(l, "positions", c.lr.positions, ls);
        read_key(l, "positions_final_factor", c.lr.positions_final_factor, ls);
        read_key(l, "rotations", c.lr.rotations, ls);
        read_key(l, "log_scales", c.lr.log_scales, ls);
        read_key(l, "opacity", c.lr.opacity, ls);
        read_key(l, "sh", c.lr.sh, ls);
        read_key(l, "features", c.lr.features, ls);
        read_key(l, "decoder", c.lr.decoder, ls);
        reject_unknown(l, ls, "lr.");
    }
    reject_unknown(j, seen, "");
    c.validate();
    return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorKind::MissingFile, path.string());
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
    return TrainConfig::from_json(j);
}

AdamState AdamState::for_parameters(const GaussianCloud& c, const SemanticDecoder& d) {
    AdamState s;
    auto init = [](AdamGroup& g, std::size_t n) {
        g.m.assign(n, 0.0);
        g.v.assign(n, 0.0);
    };
    init(s.positions, c.positions.size());
    init(s.rotations, c.rotations.size());
    init(s.log_scales, c.log_scales.size());
    init(s.opacity, c.opacity_logits.size());
    init(s.sh, c.sh_coeffs.size());
    init(s.features, c.features.size());
    init(s.decoder, d.parameter_count());
    return s;
}

bool AdamState::mirrors(const GaussianCloud& c, const SemanticDecoder& d) const {
    auto same = [](const AdamGroup& g, std::size_t n) { return g.m.size() == n && g.v.size() == n; };
    return same(positions, c.positions.size()) && same(rotations, c.rotations.size()) &&
           same(log_scales, c.log_scales.size()) && same(opacity, c.opacity_logits.size()) &&
           same(sh, c.sh_coeffs.size()) && same(features, c.features.size()) && same(decoder, d.parameter_count());
}

void adam_update(std::vector<double>& params, const std::vector<double>& grads, AdamGroup& g, double lr,
                 long long step) {
    if (grads.size() != params.size() || g.m.size() != params.size()) {
        fail(ErrorKind::ShapeMismatch, "optimizer state does not mirror the parameters");
    }
    const double b1 = AdamState::beta1, b2 = AdamState::beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    const double step_size = lr / c1;
    const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double gi = grads[i];
        g.m[i] = b1 * g.m[i] + (1.0 - b1) * gi;
        g.v[i] = b2 * g.v[i] + (1.0 - b2) * gi * gi;
    }
    if (lr == 0.0) return;
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= step_size * g.m[i] / (std::sqrt(g.v[i]) * inv_sqrt_c2 + AdamState::eps);
    }
}

std::size_t sample_view(const std::vector<std::size_t>& gt_pool, const std::vector<std::size_t>& pseudo_pool,
                        long long step, std::uint64_t seed, int ratio_gt, int ratio_pseudo) {
    if (ratio_gt < 0 || ratio_pseudo < 0 || ratio_gt + ratio_pseudo <= 0) {
        fail(ErrorKind::ConfigError, "sampling ratio must be positive");
    }
    if ((ratio_gt > 0 && gt_pool.empty()) || (ratio_pseudo > 0 && pseudo_pool.empty())) {
        fail(ErrorKind::EmptyPool, gt_pool.empty() && ratio_gt > 0 ? "no ground-truth views to sample"
                                                                   : "no pseudo-labelled views to sample");
    }
    const auto block = static_cast<std::uint64_t>(ratio_gt + ratio_pseudo);
    const auto s = static_cast<std::uint64_t>(step);
    bool gt_slot = ratio_pseudo == 0;
    if (ratio_gt > 0 && ratio_pseudo > 0) {
        if (ratio_gt == 1) {
            gt_slot = s % block == splitmix64(mix_seed(seed, s / block)) % block;
        } else {
            Rng rng(mix_seed(seed, s / block));
            const auto slots = rng.sample_without_replacement(block, static_cast<std::size_t>(ratio_gt));
            gt_slot = std::find(slots.begin(), slots.end(), s % block) != slots.end();
        }
    }
    const auto& pool = gt_slot ? gt_pool : pseudo_pool;
    return pool[splitmix64(mix_seed(seed ^ 0x5EEDF00Dull, s)) % pool.size()];
}

void training_pools(const Scene& scene, const TrainConfig& config, std::vector<std::size_t>& gt_pool,
                    std::vector<std::size_t>& pseudo_pool) {
    gt_pool.clear();
    pseudo_pool.clear();
    for (std::size_t i = 0; i < scene.views.size(); ++i) {
        const auto kind = scene.views[i].kind;
        if (kind == LabelKind::GroundTruth) {
            gt_pool.push_back(i);
        } else if (config.use_pseudo ? kind == LabelKind::Pseudo : true) {
            pseudo_pool.push_back(i);
        }
    }
}

TrainerState init_state(const Scene& scene, const TrainConfig& config) {
    config.validate();
    if (scene.points.empty()) fail(ErrorKind::EmptyInput, "scene has no sparse points");
    TrainerState s;
    s.cloud = init_from_points(scene.points, config.feature_dim, mix_seed(config.seed, 1), config.sh_degree);
    s.decoder = SemanticDecoder::create(config.feature_dim, config.hidden_dim, scene.num_classes,
                                        mix_seed(config.seed, 2));
    s.adam = AdamState::for_parameters(s.cloud, s.decoder);
    s.index = SpatialIndex::build(s.cloud.positions);
    s.grad_accum.assign(s.cloud.size(), 0.0);
    s.grad_count.assign(s.cloud.size(), 0);
    if (!scene.views.empty()) {
        Vec3 mean = Vec3::Zero();
        for (const auto& v : scene.views) mean += v.camera.pose.center();
        mean /= static_cast<double>(scene.views.size());
        double radius = 0.0;
        for (const auto& v : scene.views) radius = std::max(radius, (v.camera.pose.center() - mean).norm());
        s.scene_extent = radius > 0 ? 1.1 * radius : 1.0;
    }
    return s;
}

LossReport train_step(TrainerState& state, const View& view, const TrainConfig& config) {
    auto& cloud = state.cloud;
    RenderSettings settings;
    settings.threads = config.threads;
    const auto out = render(cloud, view.camera, settings);
    const int H = out.color_image.height, W = out.color_image.width, F = cloud.feature_dim;

    LossReport parts;
    const auto l1 = l1_loss(out.color_image, view.image);
    parts.l1 = l1.value;
    Image d_color = l1.adjoint;
    // Views smaller than the SSIM window train on L1 alone.
    if (std::min(H, W) >= kSsimWindow) {
        const auto ds = dssim_loss(out.color_image, view.image);
        parts.dssim = ds.value;
        for (std::size_t i = 0; i < d_color.data.size(); ++i) d_color.data[i] += ds.adjoint.data[i];
    }

    FeatureMap d_feature(H, W, F);
    std::vector<double> decoder_grad(state.decoder.parameter_count(), 0.0);

    // Cross-entropy only on the pixels it supervises: every labelled pixel on
    // ground-truth views, boundary-mask pixels on pseudo views.
    const bool supervise = view.kind == LabelKind::GroundTruth || (view.kind == LabelKind::Pseudo && config.use_pseudo);
    if (supervise) {
        std::vector<std::size_t> pixels;
        for (std::size_t p = 0; p < out.feature_map.pixels(); ++p) {
            if (view.labels.data[p] == kIgnoreLabel) continue;
            if (view.kind == LabelKind::Pseudo && view.boundary.data[p] == 0) continue;
            pixels.push_back(p);
        }
        if (!pixels.empty()) {
            RowMatrix rows(static_cast<Eigen::Index>(pixels.size()), F);
            std::vector<std::uint8_t> labels(pixels.size());
            for (std::size_t r = 0; r < pixels.size(); ++r) {
                const auto f = out.feature_map.pixel(pixels[r]);
                for (int c = 0; c < F; ++c) rows(static_cast<Eigen::Index>(r), c) = f[c];
                labels[r] = view.labels.data[pixels[r]];
            }
            const RowMatrix logits = decode_rows(rows, state.decoder);
            RowMatrix d_logits;
            parts.ce = ce_loss_rows(logits, labels, d_logits);
            const auto back = decode_rows_backward(rows, state.decoder, d_logits);
            for (std::size_t r = 0; r < pixels.size(); ++r) {
                auto dst = d_feature.pixel(pixels[r]);
                for (int c = 0; c < F; ++c) dst[c] += back.d_features(static_cast<Eigen::Index>(r), c);
            }
            decoder_grad = back.grads.flatten();
        }
    }

    const std::uint64_t step_seed = mix_seed(config.seed, static_cast<std::uint64_t>(state.step));
    const long long max_m = static_cast<long long>(H) * W / (config.k + 1);
    const int m2d = static_cast<int>(std::min<long long>(config.agg2d_samples, max_m));
    if (config.weights.a > 0 && m2d > 0) {
        const auto agg = agg2d_loss(out.feature_map, m2d, config.k, mix_seed(step_seed, 2));
        parts.agg2d = agg.value;
        for (std::size_t i = 0; i < d_feature.data.size(); ++i) d_feature.data[i] += config.weights.a * agg.adjoint.data[i];
    }
    PointFeatureLoss agg3d;
    if (config.weights.b > 0 && cloud.size() > static_cast<std::size_t>(config.k)) {
        agg3d = agg3d_loss(cloud, state.index, config.agg3d_samples, config.k, mix_seed(step_seed, 3));
        parts.agg3d = agg3d.value;
    }
    LossReport report;
    try {
        report = total_loss(parts, config.weights);
    } catch (const Error&) {
        fail(ErrorKind::NonFiniteLoss, "non-finite loss at step " + std::to_string(state.step));
    }

    GradientBundle grads = GradientBundle::zeros_like(cloud);
    render_backward_into(cloud, view.camera, out, d_color, d_feature, settings, grads);
    if (!agg3d.d_features.empty()) {
        for (std::size_t i = 0; i < grads.features.size(); ++i) grads.features[i] += config.weights.b * agg3d.d_features[i];
    }
    if (!grads.all_finite()) fail(ErrorKind::NonFiniteLoss, "non-finite gradient at step " + std::to_string(state.step));

    // Densification statistics in normalised device units.
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!grads.visible[i]) continue;
        const double gx = grads.mean2d[2 * i] * 0.5 * W, gy = grads.mean2d[2 * i + 1] * 0.5 * H;
        state.grad_accum[i] += std::sqrt(gx * gx + gy * gy);
        ++state.grad_count[i];
    }

    const auto& lr = config.lr;
    const double progress = config.total_steps > 0
                                ? std::min(1.0, static_cast<double>(state.step) / config.total_steps)
                                : 0.0;
    const double lr_pos = lr.positions * std::pow(lr.positions_final_factor, progress);
    auto& adam = state.adam;
    ++adam.step;
    adam_update(cloud.positions, grads.positions, adam.positions, lr_pos, adam.step);
    adam_update(cloud.rotations, grads.rotations, adam.rotations, lr.rotations, adam.step);
    adam_update(cloud.log_scales, grads.log_scales, adam.log_scales, lr.log_scales, adam.step);
    adam_update(cloud.opacity_logits, grads.opacity_logits, adam.opacity, lr.opacity, adam.step);
    adam_update(cloud.sh_coeffs, grads.sh_coeffs, adam.sh, lr.sh, adam.step);
    adam_update(cloud.features, grads.features, adam.features, lr.features, adam.step);
    auto params = state.decoder.flatten();
    adam_update(params, decoder_grad, adam.decoder, lr.decoder, adam.step);
    if (lr.decoder != 0.0) state.decoder.unflatten(params);
    return report;
}

namespace {

// Output row r takes source row src[r] (or zeros for -1) from a strided array.
void gather_rows(std::vector<double>& data, std::size_t stride, const std::vector<long long>& src) {
    std::vector<double> out(src.size() * stride, 0.0);
    for (std::size_t r = 0; r < src.size(); ++r) {
        if (src[r] < 0) continue;
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(src[r] * stride), stride,
                    out.begin() + static_cast<std::ptrdiff_t>(r * stride));
    }
    data.swap(out);
}

} // namespace

DensifyStats densify_and_prune(TrainerState& state, const TrainConfig& config) {
    auto& cloud = state.cloud;
    const std::size_t n = cloud.size();
    DensifyStats stats;
    std::vector<double> mean_grad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (state.grad_count[i] > 0) mean_grad[i] = state.grad_accum[i] / state.grad_count[i];
    }
    std::vector<std::uint8_t> keep(n, 1);
    std::size_t survivors = 0;
    for (std::size_t i = 0; i < n; ++i) {
        keep[i] = sigmoid(cloud.opacity_logits[i]) >= config.eps_prune;
        survivors += keep[i];
    }
    stats.pruned = n - survivors;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i] && mean_grad[i] > config.tau_grad) candidates.push_back(i);
    }
    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        return mean_grad[a] > mean_grad[b] || (mean_grad[a] == mean_grad[b] && a < b);
    });
    const std::size_t budget = config.max_points > survivors ? config.max_points - survivors : 0;
    if (candidates.size() > budget) {
        stats.skipped = candidates.size() - budget;
        candidates.resize(budget);
    }
    enum : std::uint8_t { kNone, kClone, kSplit };
    std::vector<std::uint8_t> action(n, kNone);
    const double split_threshold = config.split_extent_fraction * state.scene_extent;
    for (std::size_t i : candidates) {
        const Vec3 s = activate_scale(cloud.log_scale(i));
        action[i] = s.maxCoeff() > split_threshold ? kSplit : kClone;
    }

    // Row plan: survivors in order (split parents become their first child),
    // then appended clones and second children.
    std::vector<long long> src;     // parameter source row
    std::vector<long long> moments; // optimizer source row, -1 for new points
    std::vector<std::uint8_t> child; // 1 when the row is a split child
    std::vector<long long> appended_src;
    std::vector<std::uint8_t> appended_child;
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        if (action[i] == kSplit) {
            src.push_back(static_cast<long long>(i));
            moments.push_back(-1);
            child.push_back(1);
            appended_src.push_back(static_cast<long long>(i));
            appended_child.push_back(1);
            ++stats.split;
        } else {
            src.push_back(static_cast<long long>(i));
            moments.push_back(static_cast<long long>(i));
            child.push_back(0);
            if (action[i] == kClone) {
                appended_src.push_back(static_cast<long long>(i));
                appended_child.push_back(0);
                ++stats.cloned;
            }
        }
    }
    for (std::size_t a = 0; a < appended_src.size(); ++a) {
        src.push_back(appended_src[a]);
        moments.push_back(-1);
        child.push_back(appended_child[a]);
    }

    const std::vector<double> old_positions = cloud.positions;
    const std::vector<double> old_log_scales = cloud.log_scales;
    const std::vector<double> old_rotations = cloud.rotations;
    gather_rows(cloud.positions, 3, src);
    gather_rows(cloud.rotations, 4, src);
    gather_rows(cloud.log_scales, 3, src);
    gather_rows(cloud.opacity_logits, 1, src);
    gather_rows(cloud.sh_coeffs, static_cast<std::size_t>(cloud.sh_stride()), src);
    gather_rows(cloud.features, static_cast<std::size_t>(cloud.feature_dim), src);

    Rng rng(mix_seed(config.seed ^ 0xDE5C0DEull, static_cast<std::uint64_t>(state.step)));
    const double shrink = std::log(config.split_divisor);
    for (std::size_t r = 0; r < src.size(); ++r) {
        if (!child[r]) continue;
        const auto i = static_cast<std::size_t>(src[r]);
        const Vec3 scale = activate_scale(Vec3(old_log_scales[3 * i], old_log_scales[3 * i + 1], old_log_scales[3 * i + 2]));
        const Mat3 R = quaternion_to_rotation(
            Vec4(old_rotations[4 * i], old_rotations[4 * i + 1], old_rotations[4 * i + 2], old_rotations[4 * i + 3]));
        Vec3 u;
        do {
            u = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        } while (u.squaredNorm() > 1.0);
        const Vec3 offset = R * scale.cwiseProduct(u);
        for (int a = 0; a < 3; ++a) {
            cloud.positions[3 * r + a] = old_positions[3 * i + a] + offset[a];
            cloud.log_scales[3 * r + a] = old_log_scales[3 * i + a] - shrink;
        }
    }

    auto remap = [&](AdamGroup& g, std::size_t stride) {
        gather_rows(g.m, stride, moments);
        gather_rows(g.v, stride, moments);
    };
    remap(state.adam.positions, 3);
    remap(state.adam.rotations, 4);
    remap(state.adam.log_scales, 3);
    remap(state.adam.opacity, 1);
    remap(state.adam.sh, static_cast<std::size_t>(cloud.sh_stride()));
    remap(state.adam.features, static_cast<std::size_t>(cloud.feature_dim));

    state.grad_accum.assign(cloud.size(), 0.0);
    state.grad_count.assign(cloud.size(), 0);
    state.index = SpatialIndex::build(cloud.positions, state.index.generation() + 1);
    return stats;
}

namespace {

std::string csv_row(long long step, const LossReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", step, r.l1, r.dssim, r.ce, r.agg2d,
                  r.agg3d, r.total);
    return buf;
}

} // namespace

TrainerState run(const Scene& scene, const TrainConfig& config, const RunOptions& options) {
#ifdef __GLIBC__
    // Per-step buffers are tens of MB; keep them on the heap instead of
    // mapping and faulting fresh pages every step.
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 1024 << 20);
#endif
    TrainerState state = init_state(scene, config);
    std::vector<std::size_t> gt_pool, pseudo_pool;
    training_pools(scene, config, gt_pool, pseudo_pool);
    if (config.total_steps > 0) sample_view(gt_pool, pseudo_pool, 0, config.seed, config.ratio_gt, config.ratio_pseudo);

    std::ofstream log;
    if (options.log_csv) {
        if (options.log_csv->has_parent_path()) std::filesystem::create_directories(options.log_csv->parent_path());
        log.open(*options.log_csv, std::ios::trunc);
        if (!log) fail(ErrorKind::IoError, "cannot write " + options.log_csv->string());
        log << "step,l1,dssim,ce,agg2d,agg3d,total\n";
    }
    const bool frozen = config.lr.all_zero();
    LossReport window{};
    int window_count = 0;
    for (long long s = 0; s < config.total_steps; ++s) {
        const std::size_t vi = sample_view(gt_pool, pseudo_pool, s, config.seed, config.ratio_gt, config.ratio_pseudo);
        const auto& view = scene.views[vi];
        const LossReport rep = train_step(state, view, config);
        state.step = s + 1;
        if (log.is_open()) log << csv_row(state.step, rep);
        if (options.on_step) options.on_step({state.step, vi, view.kind, state.cloud.size(), rep});
        window.l1 += rep.l1;
        window.dssim += rep.dssim;
        window.ce += rep.ce;
        window.agg2d += rep.agg2d;
        window.agg3d += rep.agg3d;
        window.total += rep.total;
        ++window_count;
        if (state.step % config.log_interval == 0 && options.on_summary) {
            char buf[256];
            const double c = window_count;
            std::snprintf(buf, sizeof buf,
                          "step %lld  points %zu  l1 %.4f  dssim %.4f  ce %.4f  agg2d %.4f  agg3d %.4f  total %.4f",
                          state.step, state.cloud.size(), window.l1 / c, window.dssim / c, window.ce / c,
                          window.agg2d / c, window.agg3d / c, window.total / c);
            options.on_summary(buf);
            window = {};
            window_count = 0;
        }
        if (!frozen && state.step % config.densify_interval == 0 && state.step < config.total_steps) {
            densify_and_prune(state, config);
        }
    }
    if (log.is_open()) {
        log.close();
        if (!log) fail(ErrorKind::IoError, "failed writing " + options.log_csv->string());
    }
    if (options.checkpoint) save_checkpoint(*options.checkpoint, state.cloud, &state.decoder);
    return state;
}

} // namespace semsplat
