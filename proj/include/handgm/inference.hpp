#pragma once

#include <span>
#include <vector>

#include "handgm/grid.hpp"
#include "handgm/model_pool.hpp"
#include "handgm/skeleton.hpp"

namespace handgm {

/// Zero-padded correlation of a sender product with a displacement kernel:
/// out[m, n] = Σ_{dm,dn} k(dm, dn) · h[m+dm, n+dn]. No normalization.
Grid2D convolve_message(const Grid2D& h, const PairwiseKernel& k);

/// One message send: h = unary ⊙ Π incoming, then convolve_message, then
/// normalize to sum 1. Throws std::domain_error when h is all zero.
Grid2D send_message(const Grid2D& unary, std::span<const Grid2D> incoming,
                    const PairwiseKernel& kernel);

/// Completed directed messages of one inference run, keyed by schedule index.
class MessageBuffer {
  public:
    explicit MessageBuffer(size_t send_count) : messages_(send_count), ready_(send_count, 0) {}

    void store(size_t send_index, Grid2D m);
    const Grid2D& at(size_t send_index) const;
    const Grid2D& at(const MessageSchedule& schedule, KeypointId sender, KeypointId receiver) const;
    bool complete() const;
    size_t size() const { return messages_.size(); }

  private:
    std::vector<Grid2D> messages_;
    std::vector<char> ready_;
};

struct TwoPassOptions {
    // Normalizing each message keeps magnitudes near 1; turning it off
    // reproduces the textbook recursion for equivalence checks.
    bool normalize_messages = true;
};

/// Per-send intermediates kept when a caller asks for a trace (training).
struct SendRecord {
    std::vector<int> in_sends;  // schedule indices of the messages folded into h
    Grid2D h;                   // floored unary ⊙ incoming messages at the sender
    Grid2D m;                   // outgoing message as consumed downstream
    double norm = 1.0;          // pre-normalization sum of the raw message
};

struct NodeRecord {
    std::vector<int> in_sends;  // schedule indices of all messages into this node
    Grid2D unary;               // floored unary used in products
    Grid2D belief;              // unnormalized unary ⊙ Π incoming
    double sum = 0.0;
};

struct TwoPassTrace {
    std::vector<SendRecord> sends;
    std::vector<NodeRecord> nodes;
    bool normalized_messages = true;
};

/// Exact tree marginals: leaf-to-root then root-to-leaf sends, then per-node
/// belief normalization. Unaries are floored at kKernelFloor first. Output
/// keeps the input stack's frame tag; every layer sums to 1.
ConfidenceStack two_pass_marginals(const SkeletonTree& tree, const MessageSchedule& schedule,
                                   const GraphicalModel& model, const ConfidenceStack& unaries,
                                   const TwoPassOptions& options = {},
                                   TwoPassTrace* trace = nullptr);

/// Enumeration oracle: sums the joint (floored unaries times one pairwise
/// factor per tree edge, parent-to-child kernel indexed by sender minus
/// receiver) over every configuration. Throws when (H·W)^K > 1e7.
ConfidenceStack brute_force_marginals(const SkeletonTree& tree, const MessageSchedule& schedule,
                                      const GraphicalModel& model, const ConfidenceStack& unaries);

/// Per-keypoint weighted sum of per-model two-pass marginals.
ConfidenceStack mixture_marginals(const SkeletonTree& tree, const MessageSchedule& schedule,
                                  const ModelPool& pool, const MixtureWeights& weights,
                                  const ConfidenceStack& unaries, const TwoPassOptions& options = {});

/// Synchronous message passing with a fixed iteration count. Converges to the
/// two-pass result on trees once iterations reach the tree diameter;
/// experimental, not used by the CLI pipeline.
ConfidenceStack iterative_marginals(const SkeletonTree& tree, const MessageSchedule& schedule,
                                    const GraphicalModel& model, const ConfidenceStack& unaries,
                                    int iterations);

struct Prediction {
    ConfidenceStack marginals;      // original frame, each layer renormalized
    std::vector<GridIndex> peaks;   // per-keypoint argmax cells
    Pose pose;                      // peak locations as (x=col, y=row) grid points
};

/// Full pipeline on original-frame unaries: rotate by angle_deg into the
/// canonical frame, run the weighted mixture, rotate marginals back, then
/// renormalize and decode argmax locations.
Prediction predict(const SkeletonTree& tree, const MessageSchedule& schedule, const ModelPool& pool,
                   const MixtureWeights& weights, const ConfidenceStack& unaries, double angle_deg);

}  // namespace handgm
