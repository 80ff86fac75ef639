#include "handgm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace handgm {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg_to_rad(double d) { return d * kPi / 180.0; }

// Four bilinear taps for sampling a grid at continuous (x, y); taps outside
// the grid are skipped (zero fill).
template <typename Fn>
void for_each_bilinear_tap(int height, int width, double x, double y, Fn&& fn) {
    int n0 = static_cast<int>(std::floor(x));
    int m0 = static_cast<int>(std::floor(y));
    double fx = x - n0;
    double fy = y - m0;
    const double w[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
    const int dm[4] = {0, 0, 1, 1};
    const int dn[4] = {0, 1, 0, 1};
    for (int t = 0; t < 4; ++t) {
        int m = m0 + dm[t];
        int n = n0 + dn[t];
        if (m >= 0 && m < height && n >= 0 && n < width && w[t] != 0.0) fn(m, n, w[t]);
    }
}

}  // namespace

double wrap_degrees(double deg) {
    double x = std::fmod(deg, 360.0);
    if (x > 180.0) x -= 360.0;
    if (x <= -180.0) x += 360.0;
    return x;
}

Vec2 pose_centroid(const Pose& pose) {
    if (pose.pts.empty()) throw std::invalid_argument("pose_centroid: empty pose");
    Vec2 c{0.0, 0.0};
    for (const Vec2& p : pose.pts) c = c + p;
    return c * (1.0 / pose.size());
}

BoundingBox tight_pose_box(const Pose& pose) {
    if (pose.pts.empty()) throw std::invalid_argument("tight_pose_box: empty pose");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const Vec2& p : pose.pts) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    BoundingBox box;
    box.center = {(xmin + xmax) / 2.0, (ymin + ymax) / 2.0};
    box.side = std::max(xmax - xmin, ymax - ymin);
    return box;
}

double canonical_angle(const Pose& pose) {
    if (pose.size() < 10)
        throw std::invalid_argument("canonical_angle: pose must contain keypoints 0 and 9");
    Vec2 v = pose[9] - pose[0];
    if (v.x == 0.0 && v.y == 0.0)
        throw std::domain_error("canonical_angle: keypoints 0 and 9 coincide (direction undefined)");
    return std::atan2(v.x, -v.y) * 180.0 / kPi;
}

Vec2 rotate_point(Vec2 p, double angle_deg, Vec2 center) {
    double a = deg_to_rad(angle_deg);
    double c = std::cos(a), s = std::sin(a);
    Vec2 d = p - center;
    return {center.x + c * d.x + s * d.y, center.y - s * d.x + c * d.y};
}

Pose rotate_points(const Pose& pose, double angle_deg, Vec2 center) {
    Pose out = pose;
    for (Vec2& p : out.pts) p = rotate_point(p, angle_deg, center);
    return out;
}

Grid2D rotate_grid(const Grid2D& g, double angle_deg) {
    if (angle_deg == 0.0) return g;
    Grid2D out(g.height, g.width);
    Vec2 c{(g.width - 1) / 2.0, (g.height - 1) / 2.0};
    for (int m = 0; m < g.height; ++m) {
        for (int n = 0; n < g.width; ++n) {
            Vec2 src = rotate_point({static_cast<double>(n), static_cast<double>(m)}, -angle_deg, c);
            double acc = 0.0;
            for_each_bilinear_tap(g.height, g.width, src.x, src.y,
                                  [&](int mm, int nn, double w) { acc += w * g.at(mm, nn); });
            out.at(m, n) = acc;
        }
    }
    return out;
}

Grid2D rotate_grid_adjoint(const Grid2D& output_grad, double angle_deg) {
    if (angle_deg == 0.0) return output_grad;
    Grid2D in_grad(output_grad.height, output_grad.width);
    Vec2 c{(output_grad.width - 1) / 2.0, (output_grad.height - 1) / 2.0};
    for (int m = 0; m < output_grad.height; ++m) {
        for (int n = 0; n < output_grad.width; ++n) {
            double go = output_grad.at(m, n);
            if (go == 0.0) continue;
            Vec2 src = rotate_point({static_cast<double>(n), static_cast<double>(m)}, -angle_deg, c);
            for_each_bilinear_tap(output_grad.height, output_grad.width, src.x, src.y,
                                  [&](int mm, int nn, double w) { in_grad.at(mm, nn) += w * go; });
        }
    }
    return in_grad;
}

AlignedPose align_pose(const Pose& pose) {
    double angle = canonical_angle(pose);
    return {rotate_points(pose, angle, pose_centroid(pose)), angle};
}

Vec2 box_to_grid(Vec2 p, const BoundingBox& box, int grid_w, int grid_h) {
    Vec2 corner = box.corner();
    return {(p.x - corner.x) / box.side * grid_w - 0.5,
            (p.y - corner.y) / box.side * grid_h - 0.5};
}

Vec2 grid_to_box(Vec2 g, const BoundingBox& box, int grid_w, int grid_h) {
    Vec2 corner = box.corner();
    return {corner.x + (g.x + 0.5) / grid_w * box.side,
            corner.y + (g.y + 0.5) / grid_h * box.side};
}

Pose box_to_grid(const Pose& pose, const BoundingBox& box, int grid_w, int grid_h) {
    Pose out = pose;
    for (Vec2& p : out.pts) p = box_to_grid(p, box, grid_w, grid_h);
    return out;
}

Pose grid_to_box(const Pose& pose, const BoundingBox& box, int grid_w, int grid_h) {
    Pose out = pose;
    for (Vec2& p : out.pts) p = grid_to_box(p, box, grid_w, grid_h);
    return out;
}

}  // namespace handgm
