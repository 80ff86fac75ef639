#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "handgm/geometry.hpp"
#include "handgm/grid.hpp"
#include "handgm/inference.hpp"
#include "handgm/model_pool.hpp"
#include "handgm/skeleton.hpp"

namespace handgm {

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 32;
    int epochs = 1;
    uint64_t seed = 0;
    double kernel_floor = kKernelFloor;
    double target_sigma = 1.0;  // width of the ground-truth Gaussians, grid cells
    int threads = 1;

    void validate() const;
};

struct GmLossReport {
    double loss = 0.0;
    std::vector<double> per_keypoint;
};

/// Sum over keypoints of the squared Frobenius distance between layers.
GmLossReport gm_loss(const ConfidenceStack& predicted, const ConfidenceStack& targets);

/// Gradient of gm_loss with respect to every kernel entry; same shape as the
/// pool it was taken against.
struct PoolGradient {
    std::vector<GraphicalModel> models;
};

PoolGradient zero_gradient(const ModelPool& pool);

/// One labeled training case: original-frame unaries, ground truth in grid
/// coordinates, the canonicalization angle, and fixed mixture weights.
struct TrainSample {
    std::string id;
    ConfidenceStack unaries;
    Pose truth;
    double angle_deg = 0.0;
    MixtureWeights weights;
};

/// Normalized Gaussian target layers at the ground-truth grid locations.
ConfidenceStack render_targets(const Pose& truth, int height, int width, double sigma);

/// Loss and exact reverse-mode gradient of the predict pipeline (rotate by
/// angle, per-model two-pass, mixture, rotate back, renormalize, squared
/// error) with respect to the pool's kernels. Weights and unaries are treated
/// as constants. Adds into grad.
GmLossReport gm_grad(const SkeletonTree& tree, const MessageSchedule& schedule,
                     const ModelPool& pool, const MixtureWeights& weights,
                     const ConfidenceStack& unaries, double angle_deg,
                     const ConfidenceStack& targets, PoolGradient& grad);

struct TrainResult {
    ModelPool pool;
    std::vector<double> epoch_mean_loss;
};

/// Mini-batch Adam on the kernels, minimizing mean gm_loss over the dataset.
/// After every step entries are projected to >= kernel_floor. The sample
/// order is reshuffled each epoch from the seed; gradients are reduced in
/// sample order, so the loss history is reproducible bit for bit.
TrainResult train_gm(const SkeletonTree& tree, const MessageSchedule& schedule,
                     const ModelPool& init, std::span<const TrainSample> data,
                     const TrainConfig& cfg);

}  // namespace handgm
