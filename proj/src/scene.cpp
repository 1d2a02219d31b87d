#include "semsplat/scene.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "semsplat/errors.hpp"
#include "semsplat/image_io.hpp"

namespace semsplat {

std::string view_stem(const std::string& name) { return std::filesystem::path(name).stem().string(); }

Scene load_scene(const std::filesystem::path& dir, bool load_pseudo) {
    const auto meta_path = dir / "scene.json";
    if (!std::filesystem::exists(meta_path)) fail(ErrorKind::MissingFile, meta_path.string());
    nlohmann::json meta;
    try {
        std::ifstream(meta_path) >> meta;
    } catch (const std::exception& e) {
        fail(ErrorKind::ParseError, meta_path.string() + ": " + e.what());
    }
    if (!meta.contains("num_classes") || !meta["num_classes"].is_number_integer()) {
        fail(ErrorKind::ConfigError, meta_path.string() + ": missing integer num_classes");
    }
    Scene scene;
    scene.num_classes = meta["num_classes"].get<int>();
    if (scene.num_classes < 1 || scene.num_classes > 254) fail(ErrorKind::ConfigError, "num_classes out of range");

    const auto model = parse_colmap(dir / "colmap");
    scene.points = model.points;
    std::set<std::string> names;
    for (const auto& cv : model.views) {
        View v;
        v.name = cv.name;
        v.camera = cv.camera;
        v.image = read_png_rgb(dir / "images" / cv.name);
        if (v.image.width != v.camera.intrinsics.width || v.image.height != v.camera.intrinsics.height) {
            fail(ErrorKind::ShapeMismatch, "image " + cv.name + " does not match its camera size");
        }
        const auto label_path = dir / "labels" / cv.name;
        const auto stem = view_stem(cv.name);
        const auto pl = dir / "pseudo" / (stem + "_label.png");
        const auto pm = dir / "pseudo" / (stem + "_mask.png");
        if (std::filesystem::exists(label_path)) {
            v.kind = LabelKind::GroundTruth;
            v.labels = read_png_labels(label_path);
            require_same_shape(v.labels, LabelMap(v.image.height, v.image.width, 1), "label " + cv.name);
        } else if (load_pseudo && std::filesystem::exists(pl) && std::filesystem::exists(pm)) {
            v.kind = LabelKind::Pseudo;
            v.labels = read_png_labels(pl);
            v.boundary = read_png_labels(pm);
            require_same_shape(v.labels, LabelMap(v.image.height, v.image.width, 1), "pseudo label " + stem);
            require_same_shape(v.boundary, v.labels, "pseudo mask " + stem);
        }
        names.insert(cv.name);
        scene.views.push_back(std::move(v));
    }
    if (std::filesystem::is_directory(dir / "labels")) {
        for (const auto& e : std::filesystem::directory_iterator(dir / "labels")) {
            if (!names.count(e.path().filename().string())) {
                fail(ErrorKind::ConfigError, "label " + e.path().filename().string() + " has no matching view");
            }
        }
    }
    for (const auto& v : scene.views) {
        if (v.image.width != scene.views.front().image.width || v.image.height != scene.views.front().image.height) {
            fail(ErrorKind::ShapeMismatch, "view " + v.name + " differs in size from the first view");
        }
    }
    return scene;
}

} // namespace semsplat
