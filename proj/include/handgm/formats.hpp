#pragma once

#include <span>
#include <string>
#include <vector>

#include "handgm/geometry.hpp"
#include "handgm/grid.hpp"
#include "handgm/synth.hpp"

namespace handgm {

/// One line of an annotations file. cluster_id / prototype_id stay -1 when
/// the record does not carry them.
struct Annotation {
    std::string sample_id;
    BoundingBox box;
    Pose keypoints;  // pixel coordinates
    int cluster_id = -1;
    int prototype_id = -1;
};

// Line-delimited records; parse failures name the line number.
void write_annotations(const std::string& path, std::span<const Annotation> records);
std::vector<Annotation> read_annotations(const std::string& path);

// Binary "GMHM" stack: version, K, H, W, then K·H·W 32-bit little-endian
// floats, row-major, keypoint-major. Read failures name the byte offset.
void write_heatmaps(const std::string& path, const ConfidenceStack& stack);
ConfidenceStack read_heatmaps(const std::string& path);

struct DatasetEntry {
    Annotation annotation;
    ConfidenceStack unaries;
};

/// Directory layout: annotations.jsonl plus one <sample_id>.gmhm per sample.
void write_dataset(const std::string& dir, std::span<const Sample> samples);
std::vector<DatasetEntry> read_dataset(const std::string& dir);

Sample to_sample(const DatasetEntry& entry);

}  // namespace handgm
