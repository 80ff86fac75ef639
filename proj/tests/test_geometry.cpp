#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "handgm/geometry.hpp"
#include "handgm/grid.hpp"
#include "handgm/skeleton.hpp"

using namespace handgm;

namespace {

Pose upright_pose() {
    Pose p;
    p.pts.resize(kHandKeypointCount, {0.0, 0.0});
    // Wrist at the bottom, middle-finger chain straight up, the rest spread out
    // so the pose is not degenerate.
    p.pts[0] = {50.0, 90.0};
    for (int f = 0; f < 5; ++f)
        for (int j = 1; j <= 4; ++j) {
            double x = 20.0 + 15.0 * f + 1.5 * j;
            double y = 70.0 - 12.0 * j;
            p.pts[static_cast<size_t>(4 * f + j)] = {x, y};
        }
    p.pts[9] = {50.0, 30.0};  // directly above the wrist
    return p;
}

}  // namespace

TEST_CASE("wrap_degrees lands in (-180, 180]") {
    CHECK(wrap_degrees(0.0) == 0.0);
    CHECK(wrap_degrees(180.0) == 180.0);
    CHECK(wrap_degrees(-180.0) == 180.0);
    CHECK(wrap_degrees(540.0) == 180.0);
    CHECK(wrap_degrees(-190.0) == doctest::Approx(170.0).epsilon(1e-12));
    CHECK(wrap_degrees(361.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("canonical_angle on axis-aligned hand directions") {
    Pose p = upright_pose();

    SUBCASE("already upright") {
        CHECK(canonical_angle(p) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("pointing right") {
        p.pts[9] = {p.pts[0].x + 40.0, p.pts[0].y};
        CHECK(canonical_angle(p) == doctest::Approx(90.0).epsilon(1e-12));
    }
    SUBCASE("pointing left") {
        p.pts[9] = {p.pts[0].x - 40.0, p.pts[0].y};
        CHECK(canonical_angle(p) == doctest::Approx(-90.0).epsilon(1e-12));
    }
    SUBCASE("coincident reference points rejected") {
        p.pts[9] = p.pts[0];
        CHECK_THROWS_AS(canonical_angle(p), std::domain_error);
    }
}

TEST_CASE("rotate_point matches hand-evaluated matrix") {
    Vec2 r = rotate_point({1.0, 0.0}, 90.0, {0.0, 0.0});
    CHECK(r.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.y == doctest::Approx(-1.0).epsilon(1e-12));

    Vec2 c{3.0, -2.0};
    Vec2 p{7.5, 4.0};
    Vec2 refl = rotate_point(p, 180.0, c);
    CHECK(refl.x == doctest::Approx(2.0 * c.x - p.x).epsilon(1e-12));
    CHECK(refl.y == doctest::Approx(2.0 * c.y - p.y).epsilon(1e-12));

    Pose pose = upright_pose();
    Pose same = rotate_points(pose, 0.0, {10.0, 10.0});
    for (size_t i = 0; i < pose.pts.size(); ++i) {
        CHECK(same.pts[i].x == pose.pts[i].x);
        CHECK(same.pts[i].y == pose.pts[i].y);
    }
}

TEST_CASE("rotating a pose shifts its canonical angle") {
    Pose p = upright_pose();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> beta(-400.0, 400.0);
    for (int trial = 0; trial < 200; ++trial) {
        double b = beta(rng);
        Pose q = rotate_points(p, b, pose_centroid(p));
        double expect = wrap_degrees(canonical_angle(p) - b);
        CHECK(canonical_angle(q) == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("align_pose recovers constructed rotations") {
    Pose p = upright_pose();

    AlignedPose a = align_pose(p);
    CHECK(a.angle_deg == doctest::Approx(0.0).epsilon(1e-9));

    Pose tilted = rotate_points(p, -37.0, pose_centroid(p));
    AlignedPose b = align_pose(tilted);
    CHECK(b.angle_deg == doctest::Approx(37.0).epsilon(1e-9));
    Vec2 v = b.pose.pts[9] - b.pose.pts[0];
    CHECK(std::abs(v.x) < 1e-9 * std::abs(v.y));
    CHECK(v.y < 0.0);

    // Chirality: the cross product of two bone vectors keeps its sign.
    auto cross = [](const Pose& q) {
        Vec2 u = q.pts[9] - q.pts[0];
        Vec2 w = q.pts[17] - q.pts[0];
        return u.x * w.y - u.y * w.x;
    };
    CHECK(cross(p) * cross(b.pose) > 0.0);
}

TEST_CASE("rotate_grid identity and symmetric cases") {
    Grid2D g = render_gaussian(15, 15, {7.0, 7.0}, 2.0, false);

    Grid2D same = rotate_grid(g, 0.0);
    CHECK(same.v == g.v);

    Grid2D quarter = rotate_grid(g, 90.0);
    for (size_t i = 0; i < g.v.size(); ++i)
        CHECK(quarter.v[i] == doctest::Approx(g.v[i]).epsilon(1e-6));
}

TEST_CASE("rotate_grid moves peaks like rotate_point") {
    Grid2D g = render_gaussian(46, 46, {20.0, 10.0}, 1.5, false);
    Grid2D r = rotate_grid(g, 30.0);
    Vec2 c{(46.0 - 1.0) / 2.0, (46.0 - 1.0) / 2.0};
    Vec2 expect = rotate_point({20.0, 10.0}, 30.0, c);
    GridIndex peak = argmax_location(r);
    CHECK(std::abs(peak.n - expect.x) <= 1.0);
    CHECK(std::abs(peak.m - expect.y) <= 1.0);
}

TEST_CASE("rotate_grid round trip is accurate in the interior") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> loc(8.0, 23.0);
    std::uniform_real_distribution<double> ang(-180.0, 180.0);
    for (int trial = 0; trial < 20; ++trial) {
        Vec2 center{loc(rng), loc(rng)};
        Grid2D g = render_gaussian(31, 31, center, 1.5, true);
        double alpha = ang(rng);
        Grid2D back = rotate_grid(rotate_grid(g, alpha), -alpha);
        for (int m = 3; m < 28; ++m)
            for (int n = 3; n < 28; ++n)
                CHECK(std::abs(back.at(m, n) - g.at(m, n)) <= 2e-2);
        GridIndex p0 = argmax_location(g);
        GridIndex p1 = argmax_location(back);
        CHECK(std::abs(p0.m - p1.m) <= 1);
        CHECK(std::abs(p0.n - p1.n) <= 1);
    }
}

TEST_CASE("rotate_grid nearly conserves interior mass") {
    Grid2D g = render_gaussian(31, 31, {15.0, 14.0}, 2.0, false);
    for (double alpha : {13.0, 45.0, 77.0, 160.0}) {
        Grid2D r = rotate_grid(g, alpha);
        CHECK(std::abs(r.sum() - g.sum()) <= 0.01 * g.sum());
    }
}

TEST_CASE("rotate_grid_adjoint is the exact transpose") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double alpha : {0.0, 33.0, -118.0}) {
        Grid2D x(9, 9), y(9, 9);
        for (auto& v : x.v) v = u(rng);
        for (auto& v : y.v) v = u(rng);
        Grid2D ax = rotate_grid(x, alpha);
        Grid2D aty = rotate_grid_adjoint(y, alpha);
        double lhs = 0.0, rhs = 0.0;
        for (size_t i = 0; i < x.v.size(); ++i) {
            lhs += ax.v[i] * y.v[i];
            rhs += x.v[i] * aty.v[i];
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("box and grid coordinates invert each other") {
    BoundingBox box{{120.0, 80.0}, 200.0};
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-0.5, 45.5);
    for (int trial = 0; trial < 100; ++trial) {
        Vec2 g{u(rng), u(rng)};
        Vec2 p = grid_to_box(g, box, 46, 46);
        Vec2 back = box_to_grid(p, box, 46, 46);
        CHECK(back.x == doctest::Approx(g.x).epsilon(1e-9));
        CHECK(back.y == doctest::Approx(g.y).epsilon(1e-9));
    }
    // Box corner maps to half a cell outside the first cell center.
    Vec2 corner = box_to_grid(box.corner(), box, 46, 46);
    CHECK(corner.x == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(corner.y == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("tight_pose_box hugs the keypoints") {
    Pose p = upright_pose();
    BoundingBox box = tight_pose_box(p);
    double half = box.side / 2.0;
    double max_extent = 0.0;
    for (const Vec2& pt : p.pts) {
        CHECK(std::abs(pt.x - box.center.x) <= half + 1e-9);
        CHECK(std::abs(pt.y - box.center.y) <= half + 1e-9);
        max_extent = std::max({max_extent, std::abs(pt.x - box.center.x) * 2.0,
                               std::abs(pt.y - box.center.y) * 2.0});
    }
    CHECK(box.side == doctest::Approx(max_extent).epsilon(1e-9));
}
