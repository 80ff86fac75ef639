#pragma once

#include <vector>

#include "handgm/grid.hpp"

namespace handgm {

/// Ordered keypoint locations in pixel units, one per KeypointId.
struct Pose {
    std::vector<Vec2> pts;
    std::vector<bool> visible;  // optional; empty means all visible

    Pose() = default;
    explicit Pose(std::vector<Vec2> p) : pts(std::move(p)) {}
    int size() const { return static_cast<int>(pts.size()); }
    Vec2& operator[](int i) { return pts[i]; }
    const Vec2& operator[](int i) const { return pts[i]; }
};

/// Axis-aligned square region, usually the 2.2x hand crop.
struct BoundingBox {
    Vec2 center;
    double side = 0.0;

    Vec2 corner() const { return {center.x - side / 2.0, center.y - side / 2.0}; }
};

// Wraps an angle in degrees to the canonical range (-180, 180].
double wrap_degrees(double deg);

Vec2 pose_centroid(const Pose& pose);

// Tight square box around the keypoints: side = max extent over both axes.
BoundingBox tight_pose_box(const Pose& pose);

// Rotation aligning the wrist->reference-keypoint vector (pose[9] - pose[0])
// with image-up (0, -1): alpha* = degrees(atan2(v.x, -v.y)), counterclockwise
// positive in display orientation. Throws if the two keypoints coincide.
double canonical_angle(const Pose& pose);

// p -> R(a)(p - center) + center with R(a) = [[cos a, sin a], [-sin a, cos a]]
// in (x, y) with y down.
Vec2 rotate_point(Vec2 p, double angle_deg, Vec2 center);
Pose rotate_points(const Pose& pose, double angle_deg, Vec2 center);

// Output cell q samples the input at R(-a)(q - c) + c about the grid center c,
// bilinear, with out-of-bounds samples contributing zero.
Grid2D rotate_grid(const Grid2D& g, double angle_deg);

// Transpose of the linear map rotate_grid(., angle_deg): propagates a gradient
// with respect to the rotated output back onto the input cells.
Grid2D rotate_grid_adjoint(const Grid2D& output_grad, double angle_deg);

struct AlignedPose {
    Pose pose;
    double angle_deg = 0.0;
};

// Rotates the pose by its canonical angle about its centroid so that
// pose[9] - pose[0] points image-up.
AlignedPose align_pose(const Pose& pose);

// Box pixels <-> grid coordinates. Cell centers sit at integer grid coords;
// the box spans cell edge to cell edge.
Vec2 box_to_grid(Vec2 p, const BoundingBox& box, int grid_w, int grid_h);
Vec2 grid_to_box(Vec2 g, const BoundingBox& box, int grid_w, int grid_h);
Pose box_to_grid(const Pose& pose, const BoundingBox& box, int grid_w, int grid_h);
Pose grid_to_box(const Pose& pose, const BoundingBox& box, int grid_w, int grid_h);

}  // namespace handgm
