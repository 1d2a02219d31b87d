#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "semsplat/eval.hpp"
#include "semsplat/pseudolabel.hpp"
#include "semsplat/synth.hpp"
#include "semsplat/trainer.hpp"

namespace semsplat {

void cmd_synth(const SynthConfig& config, const std::filesystem::path& out);

struct PseudoSummary {
    std::string reference_view;
    std::size_t views = 0;
    std::size_t instances = 0;
    std::size_t flagged = 0;
};

/// Reads instances/manifest.csv (view_id,file) and the reference view's
/// ground truth, writes pseudo/<stem>_label.png and pseudo/<stem>_mask.png for
/// every view. An empty reference name uses scene.json's reference_view.
PseudoSummary cmd_pseudo(const std::filesystem::path& scene_dir, const std::string& reference_view = {},
                         double margin = kDefaultBoundaryMargin);

/// Trains on the bundle and writes out/checkpoint.bin, out/train_log.csv and
/// out/config.json. Summaries go to `log` when given.
TrainerState cmd_train(const std::filesystem::path& scene_dir, const TrainConfig& config,
                       const std::filesystem::path& out, std::ostream* log = nullptr);

/// Renders every pose of a COLMAP text model to out/rgb/, out/seg/ (indexed
/// argmax PNG) and optionally out/pca/. out/palette.csv lists class colours.
std::size_t cmd_render(const std::filesystem::path& checkpoint, const std::filesystem::path& poses,
                       const std::filesystem::path& out, bool pca = false, int threads = 1);

struct EvalSummary {
    MiouResult miou;
    std::size_t views = 0;
    std::optional<TimingReport> timing;
};

/// Compares every label PNG in pred_dir with the same file in gt_dir and
/// writes out/metrics.csv (class,iou) and out/summary.json. With a checkpoint
/// and poses the render timing is reported too.
EvalSummary cmd_eval(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir, int num_classes,
                     const std::filesystem::path& out,
                     const std::optional<std::filesystem::path>& checkpoint = std::nullopt,
                     const std::optional<std::filesystem::path>& poses = std::nullopt, int threads = 1);

} // namespace semsplat
