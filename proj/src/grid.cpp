#include "handgm/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace handgm {

double Grid2D::sum() const {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

void ConfidenceStack::validate_shapes() const {
    for (const auto& layer : layers) {
        if (!layer.same_shape(layers.front()))
            throw std::invalid_argument("ConfidenceStack: layers must share dimensions");
    }
}

void normalize_in_place(Grid2D& g) {
    double s = g.sum();
    if (s <= 0.0) throw std::domain_error("normalize: input sums to zero (degenerate distribution)");
    double inv = 1.0 / s;
    for (double& x : g.v) x *= inv;
}

Grid2D normalize(const Grid2D& g) {
    Grid2D out = g;
    normalize_in_place(out);
    return out;
}

Grid2D render_gaussian(int height, int width, Vec2 center, double sigma, bool normalized) {
    if (sigma <= 0.0) throw std::invalid_argument("render_gaussian: sigma must be positive");
    Grid2D g(height, width);
    double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int m = 0; m < height; ++m) {
        double dy = m - center.y;
        for (int n = 0; n < width; ++n) {
            double dx = n - center.x;
            g.at(m, n) = std::exp(-(dy * dy + dx * dx) * inv2s2);
        }
    }
    if (normalized) normalize_in_place(g);
    return g;
}

GridIndex argmax_location(const Grid2D& g) {
    if (g.v.empty()) throw std::invalid_argument("argmax_location: empty grid");
    size_t best = 0;
    for (size_t i = 1; i < g.v.size(); ++i) {
        if (g.v[i] > g.v[best]) best = i;
    }
    return {static_cast<int>(best) / g.width, static_cast<int>(best) % g.width};
}

Grid2D weighted_sum(std::span<const Grid2D> grids, std::span<const double> weights) {
    if (grids.size() != weights.size())
        throw std::invalid_argument("weighted_sum: grids/weights length mismatch");
    if (grids.empty()) throw std::invalid_argument("weighted_sum: empty input");
    Grid2D out(grids[0].height, grids[0].width);
    for (size_t l = 0; l < grids.size(); ++l) {
        if (!grids[l].same_shape(out)) throw std::invalid_argument("weighted_sum: dimension mismatch");
        double w = weights[l];
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += w * grids[l].v[i];
    }
    return out;
}

}  // namespace handgm
