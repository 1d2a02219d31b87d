#include "semsplat/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include "semsplat/errors.hpp"
#include "semsplat/image_io.hpp"
#include "semsplat/random.hpp"

namespace semsplat {

void SynthConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) fail(ErrorKind::ConfigError, what);
    };
    require(num_classes >= 1 && num_classes <= 250, "num_classes must lie in [1, 250]");
    require(num_blobs >= 1 && num_blobs <= 250, "num_blobs must lie in [1, 250]");
    require(num_views >= 1, "num_views must be positive");
    require(width >= 16 && height >= 16, "images must be at least 16x16");
    require(labeled_views >= 1 && labeled_views <= num_views, "labeled_views must lie in [1, num_views]");
    require(ground_points >= 0 && blob_points >= 0 && ground_points + blob_points > 0, "point counts must be positive");
}

nlohmann::json SynthConfig::to_json() const {
    return {{"num_classes", num_classes}, {"num_blobs", num_blobs},         {"num_views", num_views},
            {"width", width},             {"height", height},               {"labeled_views", labeled_views},
            {"seed", seed},               {"ground_points", ground_points}, {"blob_points", blob_points}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::ConfigError, "synth config must be a JSON object");
    SynthConfig c;
    const std::set<std::string> known = {"num_classes", "num_blobs", "num_views",     "width",      "height",
                                         "labeled_views", "seed",    "ground_points", "blob_points"};
    for (const auto& item : j.items()) {
        if (!known.count(item.key())) fail(ErrorKind::ConfigError, "unknown synth config key '" + item.key() + "'");
    }
    try {
        c.num_classes = j.value("num_classes", c.num_classes);
        c.num_blobs = j.value("num_blobs", c.num_blobs);
        c.num_views = j.value("num_views", c.num_views);
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.labeled_views = j.value("labeled_views", c.labeled_views);
        c.seed = j.value("seed", c.seed);
        c.ground_points = j.value("ground_points", c.ground_points);
        c.blob_points = j.value("blob_points", c.blob_points);
    } catch (const std::exception& e) {
        fail(ErrorKind::ConfigError, e.what());
    }
    c.validate();
    return c;
}

namespace {

const Vec3 kClassColors[] = {{0.85, 0.25, 0.2}, {0.25, 0.75, 0.3}, {0.25, 0.35, 0.9}, {0.9, 0.8, 0.2},
                             {0.7, 0.3, 0.8},   {0.2, 0.8, 0.8},   {0.95, 0.55, 0.2}, {0.6, 0.6, 0.6}};

Mat3 rotation_z(double a) {
    Mat3 R;
    R << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return R;
}

Vec3 ground_albedo(double x, double y) {
    const int cx = static_cast<int>(std::floor(x / 0.5)), cy = static_cast<int>(std::floor(y / 0.5));
    return ((cx + cy) & 1) ? Vec3(0.55, 0.52, 0.45) : Vec3(0.42, 0.45, 0.38);
}

double shade(const Vec3& normal, const Vec3& light) { return 0.35 + 0.65 * std::max(0.0, normal.dot(light)); }

// Smallest positive t where the ray meets the blob, or infinity.
double intersect_blob(const Blob& b, const Vec3& o, const Vec3& d) {
    const Vec3 ol = (b.rotation.transpose() * (o - b.center)).cwiseQuotient(b.axes);
    const Vec3 dl = (b.rotation.transpose() * d).cwiseQuotient(b.axes);
    const double A = dl.squaredNorm(), B = 2 * ol.dot(dl), C = ol.squaredNorm() - 1;
    const double disc = B * B - 4 * A * C;
    if (disc < 0) return std::numeric_limits<double>::infinity();
    const double sq = std::sqrt(disc);
    const double t0 = (-B - sq) / (2 * A), t1 = (-B + sq) / (2 * A);
    if (t0 > 1e-9) return t0;
    if (t1 > 1e-9) return t1;
    return std::numeric_limits<double>::infinity();
}

Vec3 blob_normal(const Blob& b, const Vec3& p) {
    const Vec3 local = b.rotation.transpose() * (p - b.center);
    return (b.rotation * local.cwiseQuotient(b.axes.cwiseProduct(b.axes))).normalized();
}

bool inside_blob(const Blob& b, const Vec3& p) {
    const Vec3 local = (b.rotation.transpose() * (p - b.center)).cwiseQuotient(b.axes);
    return local.squaredNorm() < 1.0;
}

} // namespace

SynthWorld make_world(const SynthConfig& config) {
    config.validate();
    Rng rng(mix_seed(config.seed, 0xB10B));
    SynthWorld w;
    w.num_classes = config.num_classes + 1;
    for (int i = 0; i < config.num_blobs; ++i) {
        Blob b;
        // Spread blob centres over a ring so that they overlap little.
        for (int attempt = 0; attempt < 200; ++attempt) {
            const double r = std::sqrt(rng.uniform()) * 1.2;
            const double a = rng.uniform(0, 2 * std::numbers::pi);
            b.axes = Vec3(rng.uniform(0.25, 0.45), rng.uniform(0.2, 0.4), rng.uniform(0.25, 0.5));
            b.center = Vec3(r * std::cos(a), r * std::sin(a), 0.6 * b.axes.z());
            bool clear = true;
            for (const auto& o : w.blobs) {
                if ((o.center - b.center).head<2>().norm() < o.axes.maxCoeff() + b.axes.maxCoeff() + 0.05) clear = false;
            }
            if (clear) break;
        }
        b.rotation = rotation_z(rng.uniform(0, std::numbers::pi));
        b.cls = 1 + i % config.num_classes;
        const Vec3 base = kClassColors[(b.cls - 1) % 8];
        b.color = (base + Vec3(rng.uniform(-0.06, 0.06), rng.uniform(-0.06, 0.06), rng.uniform(-0.06, 0.06)))
                      .cwiseMax(0.05)
                      .cwiseMin(0.95);
        w.blobs.push_back(b);
    }
    return w;
}

std::vector<Camera> make_cameras(const SynthConfig& config) {
    std::vector<Camera> cams;
    const Vec3 target(0, 0, 0.2);
    for (int i = 0; i < config.num_views; ++i) {
        const double az = 2 * std::numbers::pi * i / config.num_views;
        const double el = (35.0 + 12.0 * std::sin(3.0 * az + 0.5)) * std::numbers::pi / 180.0;
        const double radius = 4.2 + 0.4 * std::cos(2.0 * az);
        const Vec3 center = target + radius * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
        const Vec3 forward = (target - center).normalized();
        const Vec3 right = forward.cross(Vec3(0, 0, 1)).normalized();
        const Vec3 down = forward.cross(right);
        Camera cam;
        cam.pose.R.row(0) = right;
        cam.pose.R.row(1) = down;
        cam.pose.R.row(2) = forward;
        cam.pose.t = -cam.pose.R * center;
        cam.intrinsics.width = config.width;
        cam.intrinsics.height = config.height;
        cam.intrinsics.fx = 0.9 * config.width;
        cam.intrinsics.fy = 0.9 * config.width;
        cam.intrinsics.u0 = 0.5 * config.width;
        cam.intrinsics.v0 = 0.5 * config.height;
        cams.push_back(cam);
    }
    return cams;
}

OracleView oracle_render(const SynthWorld& world, const Camera& camera) {
    const auto& K = camera.intrinsics;
    OracleView out{Image(K.height, K.width, 3), LabelMap(K.height, K.width, 1), LabelMap(K.height, K.width, 1)};
    const Vec3 origin = camera.pose.center();
    const Mat3 Rt = camera.pose.R.transpose();
    const auto ground_id = static_cast<std::uint8_t>(world.blobs.size() + 1);
    for (int y = 0; y < K.height; ++y) {
        for (int x = 0; x < K.width; ++x) {
            const Vec3 d = (Rt * pixel_to_camera_ray(Vec2(x + 0.5, y + 0.5), K)).normalized();
            double best = std::numeric_limits<double>::infinity();
            int hit = -1; // blob index, or -2 for the ground
            if (d.z() < 0) {
                const double t = -origin.z() / d.z();
                const Vec3 p = origin + t * d;
                if (std::abs(p.x()) <= world.ground_half_size && std::abs(p.y()) <= world.ground_half_size) {
                    best = t;
                    hit = -2;
                }
            }
            for (std::size_t b = 0; b < world.blobs.size(); ++b) {
                const double t = intersect_blob(world.blobs[b], origin, d);
                if (t < best) {
                    best = t;
                    hit = static_cast<int>(b);
                }
            }
            if (hit == -1) continue;
            const Vec3 p = origin + best * d;
            Vec3 rgb;
            if (hit == -2) {
                rgb = ground_albedo(p.x(), p.y()) * shade(Vec3(0, 0, 1), world.light);
                out.instances.at(y, x) = ground_id;
            } else {
                const auto& b = world.blobs[static_cast<std::size_t>(hit)];
                rgb = b.color * shade(blob_normal(b, p), world.light);
                out.labels.at(y, x) = static_cast<std::uint8_t>(b.cls);
                out.instances.at(y, x) = static_cast<std::uint8_t>(hit + 1);
            }
            for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = rgb[c];
        }
    }
    return out;
}

std::vector<SparsePoint> sample_surface_points(const SynthWorld& world, const SynthConfig& config) {
    Rng rng(mix_seed(config.seed, 0x901475));
    std::vector<SparsePoint> pts;
    auto covered = [&](const Vec3& p, int skip) {
        for (std::size_t b = 0; b < world.blobs.size(); ++b) {
            if (static_cast<int>(b) != skip && inside_blob(world.blobs[b], p)) return true;
        }
        return false;
    };
    auto jitter = [&]() -> Vec3 { return Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.003; };
    for (int i = 0; i < config.ground_points; ++i) {
        const double h = world.ground_half_size;
        const Vec3 p(rng.uniform(-h, h), rng.uniform(-h, h), 0.0);
        if (covered(p, -1)) continue;
        SparsePoint s;
        s.position = p + jitter();
        s.color = ground_albedo(p.x(), p.y()) * shade(Vec3(0, 0, 1), world.light);
        pts.push_back(s);
    }
    const int per_blob = config.blob_points / std::max<int>(1, static_cast<int>(world.blobs.size()));
    for (std::size_t b = 0; b < world.blobs.size(); ++b) {
        const auto& blob = world.blobs[b];
        int placed = 0;
        for (int attempt = 0; placed < per_blob && attempt < 20 * per_blob + 100; ++attempt) {
            Vec3 u(rng.normal(), rng.normal(), rng.normal());
            u.normalize();
            const Vec3 p = blob.center + blob.rotation * blob.axes.cwiseProduct(u);
            if (p.z() < 0.01 || covered(p, static_cast<int>(b))) continue;
            SparsePoint s;
            s.position = p + jitter();
            s.color = blob.color * shade(blob_normal(blob, p), world.light);
            pts.push_back(s);
            ++placed;
        }
    }
    return pts;
}

std::vector<int> labeled_view_indices(const SynthConfig& config) {
    std::vector<int> idx;
    for (int i = 0; i < config.labeled_views; ++i) idx.push_back(i * config.num_views / config.labeled_views);
    return idx;
}

void write_synth_bundle(const SynthConfig& config, const std::filesystem::path& out) {
    config.validate();
    const SynthWorld world = make_world(config);
    const auto cameras = make_cameras(config);
    const auto labeled = labeled_view_indices(config);
    for (const char* sub : {"images", "labels", "gt_full", "instances", "colmap"}) {
        std::filesystem::remove_all(out / sub);
        std::filesystem::create_directories(out / sub);
    }
    std::filesystem::remove_all(out / "pseudo");

    std::vector<ColmapView> views;
    std::ofstream manifest(out / "instances" / "manifest.csv");
    manifest << "view_id,file\n";
    for (int i = 0; i < config.num_views; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "view_%03d", i);
        const std::string file = std::string(name) + ".png";
        const auto oracle = oracle_render(world, cameras[i]);
        write_png_rgb(out / "images" / file, oracle.image);
        write_png_indexed(out / "gt_full" / file, oracle.labels, class_palette());
        write_png_indexed(out / "instances" / file, oracle.instances, class_palette());
        if (std::find(labeled.begin(), labeled.end(), i) != labeled.end()) {
            write_png_indexed(out / "labels" / file, oracle.labels, class_palette());
        }
        manifest << name << ',' << file << '\n';
        ColmapView v;
        v.image_id = i + 1;
        v.camera_id = i + 1;
        v.name = file;
        v.camera = cameras[i];
        views.push_back(v);
    }
    write_colmap(out / "colmap", views, sample_surface_points(world, config));

    nlohmann::json meta;
    meta["num_classes"] = world.num_classes;
    meta["reference_view"] = views[static_cast<std::size_t>(labeled.front())].name;
    std::vector<std::string> labeled_names;
    for (int i : labeled) labeled_names.push_back(views[static_cast<std::size_t>(i)].name);
    meta["labeled_views"] = labeled_names;
    meta["synth"] = config.to_json();
    nlohmann::json blobs = nlohmann::json::array();
    for (const auto& b : world.blobs) {
        blobs.push_back({{"class", b.cls},
                         {"center", {b.center.x(), b.center.y(), b.center.z()}},
                         {"axes", {b.axes.x(), b.axes.y(), b.axes.z()}}});
    }
    meta["blobs"] = blobs;
    std::ofstream(out / "scene.json") << meta.dump(2) << '\n';
}

} // namespace semsplat
