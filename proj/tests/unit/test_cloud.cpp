#include <doctest.h>

#include <numbers>

#include "semsplat/cloud.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/random.hpp"
#include "semsplat/sh.hpp"

using namespace semsplat;

TEST_CASE("init_from_points single point DC round trip") {
    std::vector<SparsePoint> pts(1);
    pts[0].color = Vec3(1, 0, 0);
    const auto cloud = init_from_points(pts, kFeatureDim, 1, 0);
    REQUIRE(cloud.size() == 1);
    for (const Vec3 dir : {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0.6, -0.8, 0)}) {
        const Vec3 c = sh_to_raw_color(0, cloud.sh(0), dir);
        CHECK((c - Vec3(1, 0, 0)).norm() < 1e-12);
    }
    CHECK(sigmoid(cloud.opacity_logits[0]) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(cloud.rotation(0) == Vec4(1, 0, 0, 0));
    for (double f : cloud.features) {
        CHECK(f >= -0.01);
        CHECK(f <= 0.01);
    }
}

TEST_CASE("init_from_points tetrahedron scales") {
    const double e = 2.0;
    std::vector<SparsePoint> pts(4);
    pts[0].position = Vec3(1, 1, 1);
    pts[1].position = Vec3(1, -1, -1);
    pts[2].position = Vec3(-1, 1, -1);
    pts[3].position = Vec3(-1, -1, 1);
    const double edge = e * std::sqrt(2.0);
    const auto cloud = init_from_points(pts, kFeatureDim, 7);
    for (double ls : cloud.log_scales) CHECK(ls == doctest::Approx(std::log(edge)).epsilon(1e-9));
    CHECK(cloud.sh_coeffs.size() == 4 * 27);
}

TEST_CASE("init_from_points is deterministic and rejects empty input") {
    std::vector<SparsePoint> pts(10);
    Rng rng(3);
    for (auto& p : pts) p.position = Vec3(rng.normal(), rng.normal(), rng.normal());
    const auto a = init_from_points(pts, 16, 42);
    const auto b = init_from_points(pts, 16, 42);
    CHECK(a.features == b.features);
    CHECK(a.log_scales == b.log_scales);
    const auto c = init_from_points(pts, 16, 43);
    CHECK(a.features != c.features);
    try {
        init_from_points({}, 16, 1);
        FAIL("expected EmptyInput");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::EmptyInput);
    }
}

TEST_CASE("covariance_3d") {
    CHECK((covariance_3d({1, 0, 0, 0}, {0, 0, 0}) - Mat3::Identity()).norm() == 0.0);
    Mat3 d4 = Mat3::Identity();
    d4(0, 0) = 4;
    CHECK((covariance_3d({1, 0, 0, 0}, {std::log(2.0), 0, 0}) - d4).norm() < 1e-12);
    const double h = std::sqrt(0.5);
    Mat3 expect = Mat3::Identity();
    expect(1, 1) = 4;
    CHECK((covariance_3d({h, 0, 0, h}, {std::log(2.0), 0, 0}) - expect).norm() < 1e-12);
    // Unnormalised quaternions are renormalised first.
    CHECK((covariance_3d({3 * h, 0, 0, 3 * h}, {std::log(2.0), 0, 0}) - expect).norm() < 1e-12);

    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        const Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        const Vec3 ls(rng.uniform(-3, 2), rng.uniform(-3, 2), rng.uniform(-3, 2));
        const Mat3 C = covariance_3d(q, ls);
        CHECK((C - C.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat3> es(C);
        CHECK(es.eigenvalues().minCoeff() > 0);
    }
}

TEST_CASE("activation") {
    GaussianCloud c;
    c.sh_degree = 0;
    c.resize(2);
    c.opacity_logits = {0.0, 4.0};
    c.log_scales = {-1e9, 0.0, 1.0, 0.0, 0.0, 0.0};
    const auto act = activate(c);
    CHECK(act.opacity[0] == 0.5);
    CHECK(act.opacity[1] == doctest::Approx(0.9820).epsilon(1e-4));
    CHECK(act.scale[0] >= std::exp(-20.0));
    CHECK(act.scale[2] == doctest::Approx(std::numbers::e));
    c.validate();
    c.features.pop_back();
    CHECK_THROWS_AS(c.validate(), Error);
}
