#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "semsplat/commands.hpp"
#include "semsplat/errors.hpp"

namespace fs = std::filesystem;
using namespace semsplat;

namespace {

nlohmann::json read_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::MissingFile, path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const std::exception& e) {
        fail(ErrorKind::ParseError, path + ": " + e.what());
    }
}

int scene_classes(const fs::path& scene) {
    std::ifstream in(scene / "scene.json");
    if (!in) fail(ErrorKind::MissingFile, (scene / "scene.json").string());
    nlohmann::json j;
    try {
        in >> j;
        return j.at("num_classes").get<int>();
    } catch (const std::exception& e) {
        fail(ErrorKind::ParseError, (scene / "scene.json").string() + ": " + e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic Gaussian splatting under sparse labels"};
    app.require_subcommand(1);

    std::string scene, config_path, out, checkpoint, poses, reference, pred, gt;
    std::optional<std::uint64_t> seed;
    std::optional<int> steps;
    int threads = 1;
    int classes = 0;
    double margin = kDefaultBoundaryMargin;
    bool pca = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene bundle");
    synth->add_option("--config", config_path, "JSON synth config");
    synth->add_option("--seed", seed, "Scene seed");
    synth->add_option("--out", out, "Output bundle directory")->required();

    auto* pseudo = app.add_subcommand("pseudo", "Build pseudo labels from instance maps");
    pseudo->add_option("--scene", scene, "Scene bundle")->required();
    pseudo->add_option("--reference", reference, "Reference view (default from scene.json)");
    pseudo->add_option("--margin", margin, "Boundary margin as a fraction of min(H, W)");

    auto* train = app.add_subcommand("train", "Optimise a scene");
    train->add_option("--scene", scene, "Scene bundle")->required();
    train->add_option("--config", config_path, "JSON training config");
    train->add_option("--seed", seed, "Training seed");
    train->add_option("--steps", steps, "Total steps");
    train->add_option("--threads", threads, "Worker threads");
    train->add_option("--out", out, "Output directory")->required();

    auto* rend = app.add_subcommand("render", "Render RGB and segmentation images");
    rend->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    rend->add_option("--scene", scene, "Scene bundle whose colmap/ provides poses");
    rend->add_option("--poses", poses, "COLMAP text model with the poses to render");
    rend->add_flag("--pca", pca, "Also write feature PCA images");
    rend->add_option("--threads", threads, "Worker threads");
    rend->add_option("--out", out, "Output directory")->required();

    auto* ev = app.add_subcommand("eval", "Score predicted label maps");
    ev->add_option("--pred", pred, "Directory of predicted label PNGs")->required();
    ev->add_option("--gt", gt, "Directory of ground-truth label PNGs");
    ev->add_option("--scene", scene, "Scene bundle (num_classes, gt_full/ and poses)");
    ev->add_option("--classes", classes, "Number of classes");
    ev->add_option("--checkpoint", checkpoint, "Checkpoint to time");
    ev->add_option("--poses", poses, "COLMAP text model for timing");
    ev->add_option("--threads", threads, "Worker threads");
    ev->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*synth) {
            SynthConfig c = config_path.empty() ? SynthConfig{} : SynthConfig::from_json(read_config_json(config_path));
            if (seed) c.seed = *seed;
            cmd_synth(c, out);
            std::cout << "wrote " << c.num_views << " views to " << out << '\n';
        } else if (*pseudo) {
            const auto s = cmd_pseudo(scene, reference, margin);
            std::cout << "reference " << s.reference_view << ": " << s.instances << " labelled instances, " << s.flagged
                      << " flagged, " << s.views << " views written\n";
        } else if (*train) {
            TrainConfig c = config_path.empty() ? TrainConfig{} : load_config(config_path);
            if (seed) c.seed = *seed;
            if (steps) c.total_steps = *steps;
            c.threads = threads;
            c.validate();
            const auto state = cmd_train(scene, c, out, &std::cout);
            std::cout << "trained " << state.step << " steps, " << state.cloud.size() << " points\n";
        } else if (*rend) {
            fs::path p = !poses.empty() ? fs::path(poses) : fs::path(scene) / "colmap";
            if (poses.empty() && scene.empty()) fail(ErrorKind::ConfigError, "render needs --poses or --scene");
            const auto n = cmd_render(checkpoint, p, out, pca, threads);
            std::cout << "rendered " << n << " views\n";
        } else if (*ev) {
            if (classes == 0 && !scene.empty()) classes = scene_classes(scene);
            if (classes == 0) fail(ErrorKind::ConfigError, "eval needs --classes or --scene");
            if (gt.empty() && !scene.empty()) gt = (fs::path(scene) / "gt_full").string();
            if (gt.empty()) fail(ErrorKind::ConfigError, "eval needs --gt or --scene");
            std::optional<fs::path> ck, ps;
            if (!checkpoint.empty()) ck = checkpoint;
            if (!poses.empty()) ps = poses;
            else if (!scene.empty()) ps = fs::path(scene) / "colmap";
            const auto s = cmd_eval(pred, gt, classes, out, ck, ps, threads);
            std::cout << "mIoU " << s.miou.mean << " over " << s.views << " views\n";
            if (s.timing) std::cout << "render ms min " << s.timing->min << " mean " << s.timing->mean << " max " << s.timing->max << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "semsplat: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "semsplat: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
