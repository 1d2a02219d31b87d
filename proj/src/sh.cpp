#include "semsplat/sh.hpp"

namespace semsplat {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

} // namespace

void sh_basis(int degree, const Vec3& d, std::span<double> b) {
    const double x = d.x(), y = d.y(), z = d.z();
    b[0] = kShC0;
    if (degree < 1) return;
    b[1] = -kC1 * y;
    b[2] = kC1 * z;
    b[3] = -kC1 * x;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    b[4] = kC2[0] * x * y;
    b[5] = kC2[1] * y * z;
    b[6] = kC2[2] * (2 * zz - xx - yy);
    b[7] = kC2[3] * x * z;
    b[8] = kC2[4] * (xx - yy);
    if (degree < 3) return;
    b[9] = kC3[0] * y * (3 * xx - yy);
    b[10] = kC3[1] * x * y * z;
    b[11] = kC3[2] * y * (4 * zz - xx - yy);
    b[12] = kC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    b[13] = kC3[4] * x * (4 * zz - xx - yy);
    b[14] = kC3[5] * z * (xx - yy);
    b[15] = kC3[6] * x * (xx - 3 * yy);
}

void sh_basis_gradient(int degree, const Vec3& d, std::span<double> g) {
    const double x = d.x(), y = d.y(), z = d.z();
    auto set = [&](int k, double gx, double gy, double gz) {
        g[3 * k] = gx;
        g[3 * k + 1] = gy;
        g[3 * k + 2] = gz;
    };
    set(0, 0, 0, 0);
    if (degree < 1) return;
    set(1, 0, -kC1, 0);
    set(2, 0, 0, kC1);
    set(3, -kC1, 0, 0);
    if (degree < 2) return;
    set(4, kC2[0] * y, kC2[0] * x, 0);
    set(5, 0, kC2[1] * z, kC2[1] * y);
    set(6, -2 * kC2[2] * x, -2 * kC2[2] * y, 4 * kC2[2] * z);
    set(7, kC2[3] * z, 0, kC2[3] * x);
    set(8, 2 * kC2[4] * x, -2 * kC2[4] * y, 0);
    if (degree < 3) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    set(9, kC3[0] * 6 * x * y, kC3[0] * (3 * xx - 3 * yy), 0);
    set(10, kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y);
    set(11, kC3[2] * (-2 * x * y), kC3[2] * (4 * zz - xx - 3 * yy), kC3[2] * 8 * y * z);
    set(12, kC3[3] * (-6 * x * z), kC3[3] * (-6 * y * z), kC3[3] * (6 * zz - 3 * xx - 3 * yy));
    set(13, kC3[4] * (4 * zz - 3 * xx - yy), kC3[4] * (-2 * x * y), kC3[4] * 8 * x * z);
    set(14, kC3[5] * 2 * x * z, kC3[5] * (-2 * y * z), kC3[5] * (xx - yy));
    set(15, kC3[6] * (3 * xx - 3 * yy), kC3[6] * (-6 * x * y), 0);
}

Vec3 sh_to_raw_color(int degree, std::span<const double> coeffs, const Vec3& dir) {
    double basis[16];
    sh_basis(degree, dir, basis);
    Vec3 color(0.5, 0.5, 0.5);
    const int count = sh_basis_count(degree);
    for (int k = 0; k < count; ++k) {
        for (int c = 0; c < 3; ++c) color[c] += basis[k] * coeffs[3 * k + c];
    }
    return color;
}

} // namespace semsplat
