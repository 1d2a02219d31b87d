#include "semsplat/commands.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "semsplat/checkpoint.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/image_io.hpp"
#include "semsplat/pseudolabel.hpp"

namespace fs = std::filesystem;

namespace semsplat {

namespace {

nlohmann::json read_json(const fs::path& p) {
    if (!fs::exists(p)) fail(ErrorKind::MissingFile, p.string());
    try {
        nlohmann::json j;
        std::ifstream(p) >> j;
        return j;
    } catch (const std::exception& e) {
        fail(ErrorKind::ParseError, p.string() + ": " + e.what());
    }
}

std::vector<std::string> sorted_pngs(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorKind::MissingFile, dir.string());
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

} // namespace

void cmd_synth(const SynthConfig& config, const fs::path& out) { write_synth_bundle(config, out); }

PseudoSummary cmd_pseudo(const fs::path& scene_dir, const std::string& reference_view, double margin) {
    std::string reference = reference_view;
    if (reference.empty()) {
        const auto meta = read_json(scene_dir / "scene.json");
        if (!meta.contains("reference_view") || !meta["reference_view"].is_string()) {
            fail(ErrorKind::ConfigError, "no reference view given and scene.json names none");
        }
        reference = meta["reference_view"].get<std::string>();
    }
    const auto views = parse_colmap_views(scene_dir / "colmap");

    const auto manifest_path = scene_dir / "instances" / "manifest.csv";
    std::ifstream manifest(manifest_path);
    if (!manifest) fail(ErrorKind::MissingFile, manifest_path.string());
    std::map<std::string, std::string> files; // view stem -> instance file
    std::string line;
    int line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (line_no == 1 && line.rfind("view_id", 0) == 0)) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            fail(ErrorKind::ParseError, manifest_path.string() + ":" + std::to_string(line_no) + ": expected view_id,file");
        }
        files[line.substr(0, comma)] = line.substr(comma + 1);
    }

    std::vector<LabelMap> instance_maps;
    std::size_t ref_index = views.size();
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto stem = view_stem(views[i].name);
        const auto it = files.find(stem);
        if (it == files.end()) fail(ErrorKind::MissingFile, "instance manifest has no entry for view " + stem);
        instance_maps.push_back(read_png_labels(scene_dir / "instances" / it->second));
        const auto& K = views[i].camera.intrinsics;
        require_same_shape(instance_maps.back(), LabelMap(K.height, K.width, 1), "instance map " + it->second);
        if (views[i].name == reference || stem == reference) ref_index = i;
    }
    if (ref_index == views.size()) fail(ErrorKind::MissingReferenceLabel, "reference view " + reference + " is not in the scene");
    const auto gt_path = scene_dir / "labels" / views[ref_index].name;
    std::optional<LabelMap> gt;
    if (fs::exists(gt_path)) gt = read_png_labels(gt_path);
    const auto set = build_pseudo_labels(instance_maps, ref_index, gt ? &*gt : nullptr, margin);

    fs::create_directories(scene_dir / "pseudo");
    Palette mask_palette(2);
    mask_palette[0] = {0, 0, 0};
    mask_palette[1] = {255, 255, 255};
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto stem = view_stem(views[i].name);
        write_png_indexed(scene_dir / "pseudo" / (stem + "_label.png"), set.labels[i], class_palette());
        write_png_indexed(scene_dir / "pseudo" / (stem + "_mask.png"), set.boundary[i], mask_palette);
    }
    PseudoSummary s;
    s.reference_view = views[ref_index].name;
    s.views = views.size();
    for (std::size_t id = 1; id < set.instance_class.size(); ++id) {
        if (set.instance_class[id] != 255) ++s.instances;
        if (set.instance_flagged[id] && set.instance_class[id] != 255) ++s.flagged;
    }
    return s;
}

TrainerState cmd_train(const fs::path& scene_dir, const TrainConfig& config, const fs::path& out, std::ostream* log) {
    config.validate();
    const Scene scene = load_scene(scene_dir, config.use_pseudo);
    fs::create_directories(out);
    std::ofstream(out / "config.json") << config.to_json().dump(2) << '\n';
    RunOptions opts;
    opts.checkpoint = out / "checkpoint.bin";
    opts.log_csv = out / "train_log.csv";
    if (log) opts.on_summary = [log](const std::string& s) { *log << s << '\n' << std::flush; };
    return run(scene, config, opts);
}

std::size_t cmd_render(const fs::path& checkpoint, const fs::path& poses, const fs::path& out, bool pca, int threads) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    const auto views = parse_colmap_views(poses);
    fs::create_directories(out);
    {
        std::ofstream palette(out / "palette.csv");
        palette << "class,r,g,b\n";
        const int classes = ck.decoder ? ck.decoder->num_classes : 0;
        for (int c = 0; c < classes; ++c) {
            const auto& rgb = class_palette()[static_cast<std::size_t>(c)];
            palette << c << ',' << int(rgb[0]) << ',' << int(rgb[1]) << ',' << int(rgb[2]) << '\n';
        }
    }
    if (views.empty()) return 0;
    fs::create_directories(out / "rgb");
    if (ck.decoder) fs::create_directories(out / "seg");
    if (pca) fs::create_directories(out / "pca");
    RenderSettings settings;
    settings.threads = threads;
    for (const auto& v : views) {
        const auto r = render(ck.cloud, v.camera, settings);
        write_png_rgb(out / "rgb" / v.name, r.color_image);
        if (ck.decoder) {
            write_png_indexed(out / "seg" / v.name, argmax_labels(decode(r.feature_map, *ck.decoder)), class_palette());
        }
        if (pca) write_png_rgb(out / "pca" / v.name, pca_visualize(r.feature_map));
    }
    return views.size();
}

EvalSummary cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir, int num_classes, const fs::path& out,
                     const std::optional<fs::path>& checkpoint, const std::optional<fs::path>& poses, int threads) {
    if (num_classes < 1 || num_classes > 255) fail(ErrorKind::ConfigError, "num_classes must lie in [1, 255]");
    const auto names = sorted_pngs(pred_dir);
    if (names.empty()) fail(ErrorKind::EmptyInput, "no PNG files in " + pred_dir.string());
    ConfusionMatrix cm(num_classes);
    for (const auto& n : names) {
        const auto gt_path = gt_dir / n;
        if (!fs::exists(gt_path)) fail(ErrorKind::MissingFile, gt_path.string());
        const LabelMap pred = read_png_labels(pred_dir / n);
        const LabelMap gt = read_png_labels(gt_path);
        if (pred.height != gt.height || pred.width != gt.width) {
            fail(ErrorKind::ShapeMismatch, n + ": prediction " + std::to_string(pred.width) + "x" +
                                               std::to_string(pred.height) + " vs ground truth " +
                                               std::to_string(gt.width) + "x" + std::to_string(gt.height));
        }
        try {
            cm.add(gt, pred);
        } catch (const Error& e) {
            fail(e.kind(), n + ": " + e.what());
        }
    }
    EvalSummary s;
    s.miou = miou_from_confusion(cm);
    s.views = names.size();
    if (checkpoint) {
        const auto ck = load_checkpoint(*checkpoint);
        std::vector<Camera> cams;
        for (const auto& v : parse_colmap_views(poses ? *poses : fs::path("colmap"))) cams.push_back(v.camera);
        if (!cams.empty()) s.timing = timing_report(ck.cloud, cams, threads);
    }

    fs::create_directories(out);
    std::ofstream csv(out / "metrics.csv");
    csv << "class,iou\n";
    nlohmann::json per_class = nlohmann::json::object();
    char buf[64];
    for (int c = 0; c < num_classes; ++c) {
        if (!s.miou.scored[static_cast<std::size_t>(c)]) continue;
        std::snprintf(buf, sizeof buf, "%.17g", s.miou.iou[static_cast<std::size_t>(c)]);
        csv << c << ',' << buf << '\n';
        per_class[std::to_string(c)] = s.miou.iou[static_cast<std::size_t>(c)];
    }
    nlohmann::json summary{{"miou", s.miou.mean}, {"views", s.views}, {"pixels", cm.total()}, {"per_class", per_class}};
    if (s.timing) {
        summary["render_ms"] = {{"min", s.timing->min}, {"mean", s.timing->mean}, {"max", s.timing->max},
                                {"renders", s.timing->milliseconds.size()}};
    }
    std::ofstream(out / "summary.json") << summary.dump(2) << '\n';
    return s;
}

} // namespace semsplat
