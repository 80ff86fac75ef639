#include "handgm/skeleton.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace handgm {

namespace {

std::int64_t edge_key(KeypointId s, KeypointId r) {
    return (static_cast<std::int64_t>(s) << 32) | static_cast<std::uint32_t>(r);
}

}  // namespace

SkeletonTree::SkeletonTree(int node_count, KeypointId root,
                           std::vector<std::pair<KeypointId, KeypointId>> edges)
    : node_count_(node_count), root_(root), edges_(std::move(edges)) {
    if (node_count_ <= 0) throw std::invalid_argument("SkeletonTree: node_count must be positive");
    if (root_ < 0 || root_ >= node_count_) throw std::invalid_argument("SkeletonTree: root out of range");
    if (static_cast<int>(edges_.size()) != node_count_ - 1)
        throw std::invalid_argument("SkeletonTree: a tree over " + std::to_string(node_count_) +
                                    " nodes needs exactly " + std::to_string(node_count_ - 1) + " edges");

    parent_.assign(node_count_, -1);
    children_.assign(node_count_, {});
    neighbors_.assign(node_count_, {});
    for (auto [p, c] : edges_) {
        if (p < 0 || p >= node_count_ || c < 0 || c >= node_count_)
            throw std::invalid_argument("SkeletonTree: edge endpoint out of range");
        if (c == root_ || parent_[c] != -1)
            throw std::invalid_argument("SkeletonTree: not a tree (node " + std::to_string(c) +
                                        " has multiple parents or is the root)");
        parent_[c] = p;
        children_[p].push_back(c);
        neighbors_[p].push_back(c);
        neighbors_[c].push_back(p);
    }
    for (auto& v : children_) std::sort(v.begin(), v.end());
    for (auto& v : neighbors_) std::sort(v.begin(), v.end());

    // Edge count is right and every non-root node has a unique parent, so the
    // only remaining failure mode is disconnection (which implies a cycle).
    std::vector<KeypointId> stack{root_};
    std::vector<char> seen(node_count_, 0);
    seen[root_] = 1;
    int reached = 1;
    while (!stack.empty()) {
        KeypointId u = stack.back();
        stack.pop_back();
        for (KeypointId c : children_[u]) {
            if (!seen[c]) {
                seen[c] = 1;
                ++reached;
                stack.push_back(c);
            }
        }
    }
    if (reached != node_count_)
        throw std::invalid_argument("SkeletonTree: graph is disconnected (cycle present)");
}

MessageSchedule::MessageSchedule(std::vector<DirectedEdge> sends) : sends_(std::move(sends)) {
    index_.reserve(sends_.size());
    for (int i = 0; i < static_cast<int>(sends_.size()); ++i) {
        index_[edge_key(sends_[i].sender, sends_[i].receiver)] = i;
    }
}

int MessageSchedule::index_of(KeypointId sender, KeypointId receiver) const {
    auto it = index_.find(edge_key(sender, receiver));
    return it == index_.end() ? -1 : it->second;
}

SkeletonTree build_default_hand_tree() {
    std::vector<std::pair<KeypointId, KeypointId>> edges;
    edges.reserve(20);
    for (int finger = 0; finger < 5; ++finger) {
        int base = 4 * finger + 1;
        edges.emplace_back(0, base);
        for (int j = 0; j < 3; ++j) edges.emplace_back(base + j, base + j + 1);
    }
    return SkeletonTree(kHandKeypointCount, 0, std::move(edges));
}

MessageSchedule message_schedule(const SkeletonTree& tree) {
    std::vector<DirectedEdge> sends;
    sends.reserve(2 * tree.edge_count());

    // Leaf-to-root pass: iterative post-order with children in ascending id
    // order; each node's send to its parent comes after all its children's.
    struct Visit {
        KeypointId node;
        bool expanded;
    };
    std::vector<Visit> stack{{tree.root(), false}};
    while (!stack.empty()) {
        auto [node, expanded] = stack.back();
        stack.pop_back();
        if (expanded) {
            if (node != tree.root()) sends.push_back({node, tree.parent(node)});
            continue;
        }
        stack.push_back({node, true});
        const auto& kids = tree.children(node);
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back({*it, false});
    }

    // Root-to-leaf pass: pre-order; a node forwards to a child only after the
    // send from its own parent appears earlier in the list.
    std::vector<KeypointId> down{tree.root()};
    while (!down.empty()) {
        KeypointId node = down.back();
        down.pop_back();
        const auto& kids = tree.children(node);
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) down.push_back(*it);
        for (KeypointId c : kids) sends.push_back({node, c});
    }

    return MessageSchedule(std::move(sends));
}

}  // namespace handgm
