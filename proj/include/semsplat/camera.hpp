#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace semsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

inline constexpr double kDefaultNearPlane = 0.01;

/// Pinhole intrinsics with focal lengths already expressed in pixels.
struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double u0 = 0.0;
    double v0 = 0.0;
    int width = 1;
    int height = 1;

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

/// World-to-camera rigid transform: p_cam = R * p_world + t.
struct Pose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    void validate() const;
    /// Camera center in world coordinates, -R^T t.
    Vec3 center() const { return -R.transpose() * t; }
};

struct Camera {
    Intrinsics intrinsics;
    Pose pose;
};

struct SparsePoint {
    Vec3 position = Vec3::Zero();
    Vec3 color = Vec3::Zero();
};

struct PixelProjection {
    Vec2 pixel;
    double depth = 0.0;
};

Vec3 world_to_camera(const Vec3& p, const Pose& pose);

/// Throws BehindCamera when pc.z <= near.
PixelProjection camera_to_pixel(const Vec3& pc, const Intrinsics& K,
                                double near = kDefaultNearPlane);

/// Direction (x, y, 1) of the ray through pixel (u, v); scale by depth to get a camera point.
Vec3 pixel_to_camera_ray(const Vec2& pixel, const Intrinsics& K);

/// d(u, v) / d(x, y, z) at pc.
Mat23 projection_jacobian(const Vec3& pc, const Intrinsics& K, double near = kDefaultNearPlane);

Mat3 quaternion_to_rotation(const Vec4& q_wxyz);
Vec4 rotation_to_quaternion(const Mat3& R);

struct ColmapView {
    int image_id = 0;
    int camera_id = 0;
    std::string name;
    Camera camera;
};

struct ColmapModel {
    std::vector<ColmapView> views;
    std::vector<SparsePoint> points;
};

/// Reads cameras.txt, images.txt and points3D.txt from a COLMAP text export.
/// Views are returned in ascending IMAGE_ID order.
ColmapModel parse_colmap(const std::filesystem::path& directory);

/// Same as parse_colmap but skips points3D.txt.
std::vector<ColmapView> parse_colmap_views(const std::filesystem::path& directory);

/// Writes a PINHOLE model, one camera per view, in COLMAP text format.
void write_colmap(const std::filesystem::path& directory, const std::vector<ColmapView>& views,
                  const std::vector<SparsePoint>& points);

} // namespace semsplat
