#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "semsplat/cloud.hpp"
#include "semsplat/decoder.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/rasterizer.hpp"
#include "semsplat/scene.hpp"
#include "semsplat/spatial_index.hpp"

namespace semsplat {

struct LearningRates {
    double positions = 1.6e-4;
    double positions_final_factor = 0.01; // exponential decay target over the run
    double rotations = 1e-3;
    double log_scales = 5e-3;
    double opacity = 5e-2;
    double sh = 2.5e-3;
    double features = 2.5e-3;
    double decoder = 1e-3;

    bool all_zero() const;
};

struct TrainConfig {
    int total_steps = 30000;
    int densify_interval = 2000;
    std::size_t max_points = kMaxPoints;
    int ratio_gt = 1;
    int ratio_pseudo = 8;
    int k = 5;
    int agg2d_samples = 4096;
    int agg3d_samples = 4096;
    LossWeights weights;
    LearningRates lr;
    std::uint64_t seed = 0;
    double tau_grad = 2e-4;
    double eps_prune = 0.005;
    double split_divisor = 1.6;
    double split_extent_fraction = 0.01; // split instead of clone above this fraction of the scene extent
    bool use_pseudo = true;
    int sh_degree = 2;
    int feature_dim = kFeatureDim;
    int hidden_dim = 32;
    int threads = 1;
    int log_interval = 500;

    /// Throws ConfigError.
    void validate() const;
    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Loads a JSON config file; unknown keys are rejected.
TrainConfig load_config(const std::filesystem::path& path);

struct AdamGroup {
    std::vector<double> m, v;
};

struct AdamState {
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;
    AdamGroup positions, rotations, log_scales, opacity, sh, features, decoder;
    long long step = 0;

    static AdamState for_parameters(const GaussianCloud& cloud, const SemanticDecoder& decoder);
    bool mirrors(const GaussianCloud& cloud, const SemanticDecoder& decoder) const;
};

/// One Adam update of `params` in place.
void adam_update(std::vector<double>& params, const std::vector<double>& grads, AdamGroup& group, double lr,
                 long long step);

/// Which pool a step draws from and which member. Within each block of
/// ratio_gt + ratio_pseudo steps, exactly ratio_gt slots go to the first pool.
/// Throws EmptyPool when either pool is empty.
std::size_t sample_view(const std::vector<std::size_t>& gt_pool, const std::vector<std::size_t>& pseudo_pool,
                        long long step, std::uint64_t seed, int ratio_gt = 1, int ratio_pseudo = 8);

struct TrainerState {
    GaussianCloud cloud;
    SemanticDecoder decoder;
    AdamState adam;
    SpatialIndex index;
    std::vector<double> grad_accum; // per point, sum of screen-space mean gradient norms
    std::vector<std::uint32_t> grad_count;
    long long step = 0;
    double scene_extent = 1.0;
};

TrainerState init_state(const Scene& scene, const TrainConfig& config);

/// Render, decode, losses, backward and one Adam update for a single view.
LossReport train_step(TrainerState& state, const View& view, const TrainConfig& config);

struct DensifyStats {
    std::size_t cloned = 0, split = 0, pruned = 0, skipped = 0;
};

/// Clone or split points whose mean accumulated screen-space gradient norm
/// exceeds tau_grad, prune points with opacity below eps_prune, cap the total at
/// max_points (highest gradients first), remap Adam moments and rebuild the
/// spatial index.
DensifyStats densify_and_prune(TrainerState& state, const TrainConfig& config);

struct StepRecord {
    long long step;
    std::size_t view;
    LabelKind kind;
    std::size_t points;
    LossReport loss;
};

struct RunOptions {
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> log_csv;
    std::function<void(const StepRecord&)> on_step;
    std::function<void(const std::string&)> on_summary; // every log_interval steps
};

/// Runs config.total_steps steps from init_state. Returns the final state.
TrainerState run(const Scene& scene, const TrainConfig& config, const RunOptions& options = {});

/// Views in the first and second sampling pool for this configuration.
void training_pools(const Scene& scene, const TrainConfig& config, std::vector<std::size_t>& gt_pool,
                    std::vector<std::size_t>& pseudo_pool);

} // namespace semsplat
