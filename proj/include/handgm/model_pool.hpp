#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "handgm/geometry.hpp"
#include "handgm/grid.hpp"
#include "handgm/skeleton.hpp"

namespace handgm {

/// Lower bound kept on every kernel entry so messages stay well defined.
inline constexpr double kKernelFloor = 1e-8;

/// Directed displacement kernel: entry [r+dm, r+dn] scores the sender sitting
/// at displacement (dm, dn) from the receiver (sender minus receiver).
struct PairwiseKernel {
    int radius = 0;
    std::vector<double> v;  // (2r+1)^2, row-major over (dm, dn)

    PairwiseKernel() = default;
    PairwiseKernel(int r, double fill)
        : radius(r), v(static_cast<size_t>(2 * r + 1) * (2 * r + 1), fill) {}

    int side() const { return 2 * radius + 1; }
    double& at(int dm, int dn) { return v[static_cast<size_t>(dm + radius) * side() + (dn + radius)]; }
    double at(int dm, int dn) const { return v[static_cast<size_t>(dm + radius) * side() + (dn + radius)]; }
};

// Kernel for the reverse direction of the same pairwise function:
// out(d) = k(-d).
PairwiseKernel flipped(const PairwiseKernel& k);

/// One kernel per directed edge, stored in schedule order.
struct GraphicalModel {
    std::vector<PairwiseKernel> kernels;

    const PairwiseKernel& kernel(const MessageSchedule& schedule, KeypointId sender,
                                 KeypointId receiver) const;
};

struct ModelPool {
    int radius = 0;
    std::vector<GraphicalModel> models;

    int model_count() const { return static_cast<int>(models.size()); }
};

/// Length-L nonnegative vector summing to 1.
struct MixtureWeights {
    std::vector<double> w;

    int size() const { return static_cast<int>(w.size()); }
    // Throws unless all entries are >= 0 and sum to 1 within 1e-9.
    void validate() const;
};

MixtureWeights uniform_weights(int l_count);
MixtureWeights one_hot_weights(int l_count, int index);

// Every kernel entry 1/(2r+1)^2.
ModelPool init_uniform_pool(const SkeletonTree& tree, const MessageSchedule& schedule, int l_count,
                            int radius);

/// Per-cluster smoothed displacement histograms. Poses must already be in the
/// canonical frame and in grid units; displacements beyond the radius are
/// dropped. Empty clusters (and kernels left with no mass) fall back to
/// uniform with a warning on stderr.
ModelPool init_empirical_pool(const SkeletonTree& tree, const MessageSchedule& schedule,
                              std::span<const Pose> poses, std::span<const int> cluster_ids,
                              int l_count, int radius, double smoothing_sigma = 1.0);

// Overwrites each root-to-leaf kernel with the flip of its reverse direction,
// making both directions encode one pairwise function per edge.
void tie_directions(ModelPool& pool, const MessageSchedule& schedule);

// Binary "GMPK" container, 32-bit little-endian floats, kernels in schedule
// order, model-major.
void save_pool(const std::string& path, const ModelPool& pool);
ModelPool load_pool(const std::string& path);

}  // namespace handgm
