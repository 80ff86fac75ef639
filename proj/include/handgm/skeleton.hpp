#pragma once

#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace handgm {

using KeypointId = int;

// Standard 21-keypoint hand layout: wrist plus five 4-joint finger chains.
inline constexpr int kHandKeypointCount = 21;

struct DirectedEdge {
    KeypointId sender = -1;
    KeypointId receiver = -1;

    friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

/// Tree over keypoints. Immutable after construction; construction validates
/// connectivity and acyclicity.
class SkeletonTree {
public:
    // Edges are ordered parent->child pairs; node ids must cover [0, node_count).
    SkeletonTree(int node_count, KeypointId root,
                 std::vector<std::pair<KeypointId, KeypointId>> edges);

    int node_count() const { return node_count_; }
    KeypointId root() const { return root_; }

    // Parent of `i`, or -1 for the root.
    KeypointId parent(KeypointId i) const { return parent_[i]; }
    const std::vector<KeypointId>& children(KeypointId i) const { return children_[i]; }
    const std::vector<KeypointId>& neighbors(KeypointId i) const { return neighbors_[i]; }

    // Parent->child pairs in construction order.
    const std::vector<std::pair<KeypointId, KeypointId>>& edges() const { return edges_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }

private:
    int node_count_ = 0;
    KeypointId root_ = 0;
    std::vector<std::pair<KeypointId, KeypointId>> edges_;
    std::vector<KeypointId> parent_;
    std::vector<std::vector<KeypointId>> children_;
    std::vector<std::vector<KeypointId>> neighbors_;
};

/// Two-pass send order: leaf-to-root sends first (each node sends to its
/// parent once all of its children have sent), then root-to-leaf. Directed
/// edges appear exactly once each, so the schedule doubles as the canonical
/// directed-edge indexing used by model storage and serialization.
class MessageSchedule {
public:
    explicit MessageSchedule(std::vector<DirectedEdge> sends);

    const std::vector<DirectedEdge>& sends() const { return sends_; }
    std::size_t size() const { return sends_.size(); }
    const DirectedEdge& operator[](std::size_t i) const { return sends_[i]; }

    // Index of a directed edge within the schedule; -1 if absent.
    int index_of(KeypointId sender, KeypointId receiver) const;

private:
    std::vector<DirectedEdge> sends_;
    std::unordered_map<std::int64_t, int> index_;
};

// Wrist-rooted hand tree: root 0, finger f in {0..4} is the chain
// 0 -> 4f+1 -> 4f+2 -> 4f+3 -> 4f+4.
SkeletonTree build_default_hand_tree();

// Deterministic two-pass schedule (children in ascending id order).
MessageSchedule message_schedule(const SkeletonTree& tree);

}  // namespace handgm
