#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "handgm/geometry.hpp"
#include "handgm/grid.hpp"

namespace handgm {

struct SynthConfig {
    int sample_count = 100;
    int prototype_count = 4;
    int grid_h = 46;
    int grid_w = 46;
    double pose_sigma = 0.5;           // per-joint jitter, grid cells
    double rotation_range_deg = 180.0; // global rotation drawn from U(-range, range)
    double p_drop = 0.0;               // replace a layer with noise plus a random peak
    double p_distract = 0.0;           // add a peak at the neighboring finger
    double jitter_sigma = 0.0;         // surviving-peak jitter, grid cells
    double unary_sigma = 1.0;          // rendered Gaussian width, grid cells
    uint64_t seed = 0;

    void validate() const;
};

struct Sample {
    std::string id;
    Pose truth;               // pixel coordinates, original frame
    BoundingBox box;          // pixel coordinates; side = 2.2 x hand extent
    ConfidenceStack unaries;  // original frame, one normalized layer per keypoint
    int prototype_id = 0;
};

/// Number of built-in hand-shape prototypes (open palm, fist, point, pinch).
int prototype_count_available();

/// Canonical-frame prototype: wrist at the origin, middle-finger base straight
/// up, pixel units.
Pose prototype_pose(int which);

/// Deterministic in the seed; per-sample streams are derived so any subrange
/// regenerates identically.
std::vector<Sample> generate_dataset(const SynthConfig& cfg);

/// Ground truth mapped into the unary grid's coordinates.
Pose grid_truth(const Sample& s);

using AngleProvider = std::function<double(const Sample&)>;

AngleProvider make_zero_angle_provider();

/// Canonical angle of the ground-truth pose plus optional Gaussian noise,
/// wrapped to (-180, 180]. Noise is a pure function of (seed, sample id).
AngleProvider make_oracle_angle_provider(double noise_sigma_deg, uint64_t seed);

}  // namespace handgm
