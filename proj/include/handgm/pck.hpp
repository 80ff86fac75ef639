#pragma once

#include <span>
#include <vector>

#include "handgm/geometry.hpp"

namespace handgm {

struct PckConfig {
    std::vector<double> thresholds = {0.01, 0.02, 0.03, 0.04, 0.05, 0.06};

    // Throws unless thresholds are strictly increasing and positive.
    void validate() const;
};

struct PckReport {
    std::vector<double> thresholds;
    std::vector<double> pck;           // fraction correct per threshold, in [0, 1]
    std::vector<double> per_keypoint;  // mPCK restricted to each keypoint
    double mpck = 0.0;                 // mean of pck
    size_t sample_count = 0;
};

/// A keypoint counts as correct at threshold s when its Euclidean distance to
/// ground truth is at most s times the box side. Distances and poses are in
/// pixels; boxes are the per-sample square crops.
PckReport pck(std::span<const Pose> predictions, std::span<const Pose> truths,
              std::span<const BoundingBox> boxes, const PckConfig& cfg = {});

}  // namespace handgm
