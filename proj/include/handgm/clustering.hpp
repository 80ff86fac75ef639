#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "handgm/geometry.hpp"
#include "handgm/model_pool.hpp"
#include "handgm/skeleton.hpp"

namespace handgm {

/// Concatenation over tree edges, in up-pass schedule order, of the
/// child-minus-parent displacement (x then y). Canonical-frame poses give
/// rotation-comparable features; translation cancels, scale does not.
std::vector<double> pose_feature(const Pose& pose, const SkeletonTree& tree,
                                 const MessageSchedule& schedule);

/// pose_feature divided by the pose's tight square box side, making the
/// feature dimensionless for clustering.
std::vector<double> shape_feature(const Pose& pose, const SkeletonTree& tree,
                                  const MessageSchedule& schedule);

struct ClusterModel {
    std::vector<std::vector<double>> centroids;
    double tau = 1.0;  // soft-assignment temperature, > 0

    int cluster_count() const { return static_cast<int>(centroids.size()); }
    int dim() const { return centroids.empty() ? 0 : static_cast<int>(centroids.front().size()); }
};

struct KmeansResult {
    ClusterModel model;
    std::vector<int> assignments;
    std::vector<double> distortion_history;  // mean squared distance after each assignment step
};

/// Lloyd's algorithm with farthest-point seeding from the given seed. Stops at
/// an assignment fixed point or max_iters; empty clusters are re-seeded from
/// the point farthest from its centroid. tau is left at the mean squared
/// nearest-centroid distance of the fit. Throws when the input holds fewer
/// than l_count distinct features.
KmeansResult kmeans_fit(std::span<const std::vector<double>> features, int l_count, uint64_t seed,
                        int max_iters = 100);

/// w_l = softmax over models of (-d_l^2 / tau), d_l the centroid distance.
MixtureWeights soft_assign(const ClusterModel& model, std::span<const double> feature);

/// Index of the nearest centroid; ties broken by smallest index.
int hard_assign(const ClusterModel& model, std::span<const double> feature);

// Binary "GMKM" container, 32-bit little-endian floats.
void save_clusters(const std::string& path, const ClusterModel& model);
ClusterModel load_clusters(const std::string& path);

}  // namespace handgm
