#pragma once

#include <span>
#include <utility>
#include <vector>

namespace handgm {

/// Continuous 2D point, (x, y) = (col, row), y increasing downward.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Dense row-major H x W scalar field. Cell (m, n) sits at continuous
/// location (x, y) = (n, m).
struct Grid2D {
    int height = 0;
    int width = 0;
    std::vector<double> v;

    Grid2D() = default;
    Grid2D(int h, int w, double fill = 0.0) : height(h), width(w), v(static_cast<size_t>(h) * w, fill) {}

    double& at(int m, int n) { return v[static_cast<size_t>(m) * width + n]; }
    double at(int m, int n) const { return v[static_cast<size_t>(m) * width + n]; }
    size_t size() const { return v.size(); }
    bool same_shape(const Grid2D& o) const { return height == o.height && width == o.width; }

    double sum() const;
};

/// Which coordinate frame a set of confidence maps lives in.
enum class Frame { original, rotated };

/// Per-keypoint stack of equally sized maps.
struct ConfidenceStack {
    std::vector<Grid2D> layers;
    Frame frame = Frame::original;

    int layer_count() const { return static_cast<int>(layers.size()); }
    // Throws unless all layers share identical dimensions.
    void validate_shapes() const;
};

struct GridIndex {
    int m = 0;
    int n = 0;
    friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

// Scales so entries sum to 1. Throws std::domain_error on an all-zero input.
Grid2D normalize(const Grid2D& g);
void normalize_in_place(Grid2D& g);

// Unnormalized value at (m, n) is exp(-((m-c.y)^2 + (n-c.x)^2) / (2 sigma^2)).
// The center may lie outside the grid. Throws on sigma <= 0.
Grid2D render_gaussian(int height, int width, Vec2 center, double sigma, bool normalized);

// Location of the maximal entry; ties broken by smallest row-major index.
GridIndex argmax_location(const Grid2D& g);

// Pointwise sum_l weights[l] * grids[l]. Throws on shape or length mismatch.
Grid2D weighted_sum(std::span<const Grid2D> grids, std::span<const double> weights);

}  // namespace handgm
