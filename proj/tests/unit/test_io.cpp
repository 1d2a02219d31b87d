#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "semsplat/checkpoint.hpp"
#include "semsplat/commands.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/image_io.hpp"
#include "semsplat/random.hpp"
#include "semsplat/scene.hpp"
#include "semsplat/synth.hpp"

using namespace semsplat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("semsplat_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Every regular file below dir, relative path -> bytes.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return out;
}

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::IoError;
}

std::string message_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

SynthConfig small_synth() {
    SynthConfig c;
    c.width = c.height = 48;
    c.num_views = 6;
    c.labeled_views = 2;
    c.ground_points = 300;
    c.blob_points = 200;
    c.seed = 7;
    return c;
}

} // namespace

TEST_CASE("png round trips") {
    const auto dir = scratch("png");
    Rng rng(3);
    Image img(5, 7, 3);
    for (auto& v : img.data) v = rng.uniform();
    write_png_rgb(dir / "a.png", img);
    const Image back = read_png_rgb(dir / "a.png");
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 255 + 1e-12);

    LabelMap lab(4, 3, 1);
    for (auto& v : lab.data) v = static_cast<std::uint8_t>(rng.index(256));
    write_png_indexed(dir / "l.png", lab, class_palette());
    CHECK(read_png_labels(dir / "l.png").data == lab.data);
    CHECK(kind_of([&] { read_png_rgb(dir / "missing.png"); }) == ErrorKind::MissingFile);
    std::ofstream(dir / "junk.png") << "not a png";
    CHECK(kind_of([&] { read_png_rgb(dir / "junk.png"); }) == ErrorKind::IoError);
    CHECK(kind_of([&] { read_png_labels(dir / "a.png"); }) == ErrorKind::IoError);
    fs::remove_all(dir);
}

TEST_CASE("synth config validation") {
    CHECK(kind_of([] { SynthConfig::from_json(nlohmann::json::parse(R"({"num_views": 0})")); }) ==
          ErrorKind::ConfigError);
    CHECK(kind_of([] { SynthConfig::from_json(nlohmann::json::parse(R"({"labeled_views": 40})")); }) ==
          ErrorKind::ConfigError);
    CHECK(kind_of([] { SynthConfig::from_json(nlohmann::json::parse(R"({"colour": 1})")); }) ==
          ErrorKind::ConfigError);
    const auto c = SynthConfig::from_json(nlohmann::json::parse(R"({"num_blobs": 3, "seed": 5})"));
    CHECK(c.num_blobs == 3);
    CHECK(c.seed == 5);
}

TEST_CASE("oracle silhouettes match the label maps") {
    SynthConfig c = small_synth();
    c.width = c.height = 96;
    const auto world = make_world(c);
    const auto cams = make_cameras(c);
    for (const auto& cam : cams) {
        const auto v = oracle_render(world, cam);
        int blob_pixels = 0;
        for (std::size_t p = 0; p < v.labels.data.size(); ++p) {
            const int id = v.instances.data[p];
            const bool blob = id >= 1 && id <= c.num_blobs;
            blob_pixels += blob;
            CHECK((v.labels.data[p] != 0) == blob);
            if (blob) CHECK(int(v.labels.data[p]) == world.blobs[static_cast<std::size_t>(id - 1)].cls);
            if (id == 0) CHECK(v.image.data[3 * p] + v.image.data[3 * p + 1] + v.image.data[3 * p + 2] == 0.0);
        }
        CHECK(blob_pixels > 0);
    }
}

TEST_CASE("synth bundle: determinism, sparsity and loading") {
    const auto a = scratch("synth_a"), b = scratch("synth_b");
    const auto c = small_synth();
    cmd_synth(c, a);
    cmd_synth(c, b);
    CHECK(snapshot(a) == snapshot(b));
    int labels = 0;
    for (const auto& e : fs::directory_iterator(a / "labels")) labels += e.is_regular_file();
    CHECK(labels == 2);

    const Scene s = load_scene(a);
    CHECK(s.num_classes == 4);
    CHECK(s.views.size() == 6);
    int gt = 0;
    for (const auto& v : s.views) gt += v.kind == LabelKind::GroundTruth;
    CHECK(gt == 2);
    CHECK(s.points.size() > 100);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("pseudo command") {
    const auto dir = scratch("pseudo");
    cmd_synth(small_synth(), dir);
    const auto summary = cmd_pseudo(dir);
    CHECK(summary.reference_view == "view_000.png");
    CHECK(summary.views == 6);
    const auto first = snapshot(dir / "pseudo");
    CHECK(first.size() == 12);
    cmd_pseudo(dir);
    CHECK(snapshot(dir / "pseudo") == first);

    const Scene s = load_scene(dir);
    int pseudo = 0;
    for (const auto& v : s.views) pseudo += v.kind == LabelKind::Pseudo;
    CHECK(pseudo == 4);

    std::ofstream(dir / "instances" / "manifest.csv") << "view_id,file\nview_000,view_000.png\nview_001,view_001.png\n";
    const auto msg = message_of([&] { cmd_pseudo(dir); });
    CHECK(msg.find("view_002") != std::string::npos);
    CHECK(kind_of([&] { cmd_pseudo(dir); }) == ErrorKind::MissingFile);
    CHECK(kind_of([&] { cmd_pseudo(dir, "view_001.png"); }) == ErrorKind::MissingFile);
    fs::remove_all(dir);
}

TEST_CASE("train, render and eval commands") {
    const auto dir = scratch("cmds");
    const auto out = dir / "run";
    cmd_synth(small_synth(), dir / "scene");

    TrainConfig cfg;
    cfg.total_steps = 12;
    cfg.sh_degree = 1;
    cfg.agg2d_samples = 64;
    cfg.agg3d_samples = 64;
    cfg.log_interval = 6;
    CHECK(kind_of([&] { cmd_train(dir / "scene", cfg, out); }) == ErrorKind::EmptyPool);
    cmd_pseudo(dir / "scene");
    std::ostringstream log;
    cmd_train(dir / "scene", cfg, out, &log);
    CHECK(log.str().find("step 12") != std::string::npos);
    CHECK(fs::exists(out / "checkpoint.bin"));
    CHECK(fs::exists(out / "config.json"));
    const auto csv = slurp(out / "train_log.csv");
    cmd_train(dir / "scene", cfg, out);
    CHECK(slurp(out / "train_log.csv") == csv);

    const auto n = cmd_render(out / "checkpoint.bin", dir / "scene" / "colmap", dir / "render", true);
    CHECK(n == 6);
    CHECK(fs::exists(dir / "render" / "seg" / "view_003.png"));
    CHECK(fs::exists(dir / "render" / "pca" / "view_003.png"));
    CHECK(slurp(dir / "render" / "palette.csv").rfind("class,r,g,b\n0,", 0) == 0);
    CHECK(read_png_labels(dir / "render" / "seg" / "view_003.png").width == 48);

    fs::create_directories(dir / "empty_poses");
    write_colmap(dir / "empty_poses", {}, {});
    CHECK(cmd_render(out / "checkpoint.bin", dir / "empty_poses", dir / "render_empty") == 0);

    const auto bytes = slurp(out / "checkpoint.bin");
    std::ofstream(dir / "trunc.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    CHECK(kind_of([&] { cmd_render(dir / "trunc.bin", dir / "scene" / "colmap", dir / "r2"); }) ==
          ErrorKind::CorruptCheckpoint);

    const auto gt = dir / "scene" / "gt_full";
    const auto same = cmd_eval(gt, gt, 4, dir / "eval_same");
    CHECK(same.miou.mean == 1.0);
    CHECK(same.views == 6);
    CHECK(fs::exists(dir / "eval_same" / "metrics.csv"));
    const auto summary = nlohmann::json::parse(slurp(dir / "eval_same" / "summary.json"));
    CHECK(summary["miou"].get<double>() == 1.0);

    const auto scored = cmd_eval(dir / "render" / "seg", gt, 4, dir / "eval", out / "checkpoint.bin",
                                 dir / "scene" / "colmap");
    CHECK(scored.miou.mean >= 0.0);
    CHECK(scored.miou.mean <= 1.0);
    REQUIRE(scored.timing.has_value());
    CHECK(scored.timing->milliseconds.size() == 6);

    fs::create_directories(dir / "bad");
    write_png_indexed(dir / "bad" / "view_001.png", LabelMap(10, 10, 1), class_palette());
    const auto msg = message_of([&] { cmd_eval(dir / "bad", gt, 4, dir / "eval_bad"); });
    CHECK(msg.find("view_001.png") != std::string::npos);
    CHECK(kind_of([&] { cmd_eval(dir / "bad", gt, 4, dir / "eval_bad"); }) == ErrorKind::ShapeMismatch);
    fs::remove_all(dir);
}
