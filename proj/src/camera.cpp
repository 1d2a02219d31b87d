#include "semsplat/camera.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "semsplat/errors.hpp"

namespace semsplat {

void Intrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorKind::ConfigError, "focal lengths must be positive");
    if (width <= 0 || height <= 0) fail(ErrorKind::ConfigError, "image size must be positive");
    if (!(u0 >= 0.0 && u0 < width) || !(v0 >= 0.0 && v0 < height)) {
        fail(ErrorKind::ConfigError, "principal point outside the image");
    }
}

void Pose::validate() const {
    const Mat3 gram = R.transpose() * R;
    if (!((gram - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-6) ||
        !(std::abs(R.determinant() - 1.0) <= 1e-6)) {
        fail(ErrorKind::ConfigError, "pose rotation is not a proper rotation matrix");
    }
    if (!t.allFinite()) fail(ErrorKind::ConfigError, "pose translation is not finite");
}

Vec3 world_to_camera(const Vec3& p, const Pose& pose) { return pose.R * p + pose.t; }

PixelProjection camera_to_pixel(const Vec3& pc, const Intrinsics& K, double near) {
    if (!(pc.z() > near)) {
        fail(ErrorKind::BehindCamera, "camera-space depth " + std::to_string(pc.z()) +
                                          " is not beyond the near plane");
    }
    const double inv_z = 1.0 / pc.z();
    return {Vec2(K.fx * pc.x() * inv_z + K.u0, K.fy * pc.y() * inv_z + K.v0), pc.z()};
}

Vec3 pixel_to_camera_ray(const Vec2& pixel, const Intrinsics& K) {
    return Vec3((pixel.x() - K.u0) / K.fx, (pixel.y() - K.v0) / K.fy, 1.0);
}

Mat23 projection_jacobian(const Vec3& pc, const Intrinsics& K, double near) {
    if (!(pc.z() > near)) {
        fail(ErrorKind::BehindCamera, "camera-space depth " + std::to_string(pc.z()) +
                                          " is not beyond the near plane");
    }
    const double inv_z = 1.0 / pc.z();
    const double inv_z2 = inv_z * inv_z;
    Mat23 J;
    J << K.fx * inv_z, 0.0, -K.fx * pc.x() * inv_z2,
         0.0, K.fy * inv_z, -K.fy * pc.y() * inv_z2;
    return J;
}

Mat3 quaternion_to_rotation(const Vec4& q) {
    const Vec4 n = q / q.norm();
    const double w = n[0], x = n[1], y = n[2], z = n[3];
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Vec4 rotation_to_quaternion(const Mat3& R) {
    Eigen::Quaterniond q(R);
    q.normalize();
    if (q.w() < 0) q.coeffs() *= -1.0;
    return Vec4(q.w(), q.x(), q.y(), q.z());
}

namespace {

struct LineReader {
    std::ifstream in;
    std::string file;
    int line_number = 0;

    explicit LineReader(const std::filesystem::path& path) : in(path), file(path.string()) {
        if (!in) fail(ErrorKind::MissingFile, file);
    }

    /// Next raw line; false at EOF.
    bool next(std::string& line) {
        if (!std::getline(in, line)) return false;
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    }

    /// Next line that is neither blank nor a comment.
    bool next_record(std::string& line) {
        while (next(line)) {
            const auto first = line.find_first_not_of(" \t");
            if (first == std::string::npos || line[first] == '#') continue;
            return true;
        }
        return false;
    }

    [[noreturn]] void error(const std::string& what) const {
        fail(ErrorKind::ParseError, file + ":" + std::to_string(line_number) + ": " + what);
    }
};

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    return tokens;
}

double to_double(const LineReader& reader, const std::string& tok) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v)) reader.error("invalid number '" + tok + "'");
        return v;
    } catch (const std::logic_error&) {
        reader.error("invalid number '" + tok + "'");
    }
}

long to_long(const LineReader& reader, const std::string& tok) {
    try {
        std::size_t used = 0;
        const long v = std::stol(tok, &used);
        if (used != tok.size()) reader.error("invalid integer '" + tok + "'");
        return v;
    } catch (const std::logic_error&) {
        reader.error("invalid integer '" + tok + "'");
    }
}

std::map<int, Intrinsics> read_cameras(const std::filesystem::path& path) {
    LineReader reader(path);
    std::map<int, Intrinsics> cameras;
    std::string line;
    while (reader.next_record(line)) {
        const auto tok = tokenize(line);
        if (tok.size() < 4) reader.error("camera row needs CAMERA_ID MODEL WIDTH HEIGHT PARAMS");
        const int id = static_cast<int>(to_long(reader, tok[0]));
        const std::string& model = tok[1];
        Intrinsics K;
        K.width = static_cast<int>(to_long(reader, tok[2]));
        K.height = static_cast<int>(to_long(reader, tok[3]));
        if (model == "PINHOLE") {
            if (tok.size() != 8) reader.error("PINHOLE expects 4 parameters");
            K.fx = to_double(reader, tok[4]);
            K.fy = to_double(reader, tok[5]);
            K.u0 = to_double(reader, tok[6]);
            K.v0 = to_double(reader, tok[7]);
        } else if (model == "SIMPLE_PINHOLE") {
            if (tok.size() != 7) reader.error("SIMPLE_PINHOLE expects 3 parameters");
            K.fx = K.fy = to_double(reader, tok[4]);
            K.u0 = to_double(reader, tok[5]);
            K.v0 = to_double(reader, tok[6]);
        } else {
            reader.error("unsupported camera model '" + model +
                         "' (only PINHOLE and SIMPLE_PINHOLE are accepted)");
        }
        try {
            K.validate();
        } catch (const Error& e) {
            reader.error(e.what());
        }
        if (!cameras.emplace(id, K).second) reader.error("duplicate CAMERA_ID");
    }
    return cameras;
}

std::vector<ColmapView> read_images(const std::filesystem::path& path,
                                    const std::map<int, Intrinsics>& cameras) {
    LineReader reader(path);
    std::vector<ColmapView> views;
    std::string line;
    while (reader.next_record(line)) {
        const auto tok = tokenize(line);
        if (tok.size() != 10) {
            reader.error("image row needs IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME, got " +
                         std::to_string(tok.size()) + " fields");
        }
        ColmapView view;
        view.image_id = static_cast<int>(to_long(reader, tok[0]));
        Vec4 q;
        for (int i = 0; i < 4; ++i) q[i] = to_double(reader, tok[1 + i]);
        if (!(q.norm() > 0.0)) reader.error("zero quaternion");
        Vec3 t;
        for (int i = 0; i < 3; ++i) t[i] = to_double(reader, tok[5 + i]);
        view.camera_id = static_cast<int>(to_long(reader, tok[8]));
        view.name = tok[9];
        const auto cam = cameras.find(view.camera_id);
        if (cam == cameras.end()) reader.error("unknown CAMERA_ID " + tok[8]);
        view.camera.intrinsics = cam->second;
        view.camera.pose.R = quaternion_to_rotation(q);
        view.camera.pose.t = t;
        views.push_back(std::move(view));
        // The POINTS2D row follows every image row and may be empty.
        std::string points_line;
        reader.next(points_line);
    }
    std::sort(views.begin(), views.end(),
              [](const ColmapView& a, const ColmapView& b) { return a.image_id < b.image_id; });
    return views;
}

std::vector<SparsePoint> read_points(const std::filesystem::path& path) {
    LineReader reader(path);
    std::vector<SparsePoint> points;
    std::string line;
    while (reader.next_record(line)) {
        const auto tok = tokenize(line);
        if (tok.size() < 8 || (tok.size() - 8) % 2 != 0) {
            reader.error("point row needs POINT3D_ID X Y Z R G B ERROR TRACK[]");
        }
        SparsePoint p;
        for (int i = 0; i < 3; ++i) p.position[i] = to_double(reader, tok[1 + i]);
        for (int i = 0; i < 3; ++i) {
            const long c = to_long(reader, tok[4 + i]);
            if (c < 0 || c > 255) reader.error("color component out of range");
            p.color[i] = static_cast<double>(c) / 255.0;
        }
        to_double(reader, tok[7]);
        const std::size_t track_length = (tok.size() - 8) / 2;
        if (track_length >= 2) points.push_back(p);
    }
    return points;
}

} // namespace

std::vector<ColmapView> parse_colmap_views(const std::filesystem::path& directory) {
    const auto cameras = read_cameras(directory / "cameras.txt");
    return read_images(directory / "images.txt", cameras);
}

ColmapModel parse_colmap(const std::filesystem::path& directory) {
    for (const char* name : {"cameras.txt", "images.txt", "points3D.txt"}) {
        if (!std::filesystem::exists(directory / name)) {
            fail(ErrorKind::MissingFile, (directory / name).string());
        }
    }
    ColmapModel model;
    model.views = parse_colmap_views(directory);
    model.points = read_points(directory / "points3D.txt");
    return model;
}

void write_colmap(const std::filesystem::path& directory, const std::vector<ColmapView>& views,
                  const std::vector<SparsePoint>& points) {
    std::filesystem::create_directories(directory);
    auto open = [&](const char* name) {
        std::ofstream out(directory / name);
        if (!out) fail(ErrorKind::IoError, "cannot write " + (directory / name).string());
        out << std::setprecision(17);
        return out;
    };
    {
        auto out = open("cameras.txt");
        out << "# Camera list with one line of data per camera:\n"
            << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n"
            << "# Number of cameras: " << views.size() << "\n";
        for (const auto& v : views) {
            const auto& K = v.camera.intrinsics;
            out << v.camera_id << " PINHOLE " << K.width << ' ' << K.height << ' ' << K.fx << ' '
                << K.fy << ' ' << K.u0 << ' ' << K.v0 << '\n';
        }
    }
    {
        auto out = open("images.txt");
        out << "# Image list with two lines of data per image:\n"
            << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
            << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n"
            << "# Number of images: " << views.size() << "\n";
        for (const auto& v : views) {
            const Vec4 q = rotation_to_quaternion(v.camera.pose.R);
            const Vec3& t = v.camera.pose.t;
            out << v.image_id << ' ' << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << ' '
                << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << v.camera_id << ' ' << v.name
                << "\n\n";
        }
    }
    {
        auto out = open("points3D.txt");
        out << "# 3D point list with one line of data per point:\n"
            << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n"
            << "# Number of points: " << points.size() << "\n";
        const int first = views.empty() ? 1 : views.front().image_id;
        const int second = views.size() > 1 ? views[1].image_id : first;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& p = points[i];
            out << i + 1 << ' ' << p.position[0] << ' ' << p.position[1] << ' ' << p.position[2];
            for (int c = 0; c < 3; ++c) {
                out << ' ' << static_cast<int>(std::lround(std::clamp(p.color[c], 0.0, 1.0) * 255.0));
            }
            out << " 0 " << first << " 0 " << second << " 0\n";
        }
    }
}

} // namespace semsplat
