#include "handgm/pck.hpp"

#include <cmath>
#include <stdexcept>

namespace handgm {

void PckConfig::validate() const {
    if (thresholds.empty()) throw std::invalid_argument("threshold list is empty");
    double prev = 0.0;
    for (double t : thresholds) {
        if (!(t > prev)) throw std::invalid_argument("thresholds must be positive and strictly increasing");
        prev = t;
    }
}

PckReport pck(std::span<const Pose> predictions, std::span<const Pose> truths,
              std::span<const BoundingBox> boxes, const PckConfig& cfg) {
    cfg.validate();
    if (predictions.size() != truths.size() || predictions.size() != boxes.size())
        throw std::invalid_argument("prediction, truth, and box counts differ");
    if (predictions.empty()) throw std::invalid_argument("nothing to evaluate");

    int kp_count = truths.front().size();
    PckReport report;
    report.thresholds = cfg.thresholds;
    report.pck.assign(cfg.thresholds.size(), 0.0);
    report.per_keypoint.assign(static_cast<size_t>(kp_count), 0.0);
    report.sample_count = predictions.size();

    for (size_t s = 0; s < predictions.size(); ++s) {
        if (predictions[s].size() != kp_count || truths[s].size() != kp_count)
            throw std::invalid_argument("keypoint counts differ at sample " + std::to_string(s));
        if (!(boxes[s].side > 0.0))
            throw std::invalid_argument("non-positive box side at sample " + std::to_string(s));
        for (int k = 0; k < kp_count; ++k) {
            Vec2 d = predictions[s][k] - truths[s][k];
            double dist = std::hypot(d.x, d.y);
            for (size_t t = 0; t < cfg.thresholds.size(); ++t) {
                if (dist <= cfg.thresholds[t] * boxes[s].side) {
                    report.pck[t] += 1.0;
                    report.per_keypoint[static_cast<size_t>(k)] += 1.0;
                }
            }
        }
    }

    double total = static_cast<double>(predictions.size()) * kp_count;
    for (double& p : report.pck) p /= total;
    for (double& p : report.per_keypoint)
        p /= static_cast<double>(predictions.size()) * static_cast<double>(cfg.thresholds.size());
    double sum = 0.0;
    for (double p : report.pck) sum += p;
    report.mpck = sum / static_cast<double>(report.pck.size());
    return report;
}

}  // namespace handgm
