#include "handgm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace handgm {

Grid2D convolve_message(const Grid2D& h, const PairwiseKernel& k) {
    Grid2D out(h.height, h.width);
    int r = k.radius;
    for (int m = 0; m < h.height; ++m) {
        int dm_lo = std::max(-r, -m);
        int dm_hi = std::min(r, h.height - 1 - m);
        for (int n = 0; n < h.width; ++n) {
            int dn_lo = std::max(-r, -n);
            int dn_hi = std::min(r, h.width - 1 - n);
            double acc = 0.0;
            for (int dm = dm_lo; dm <= dm_hi; ++dm)
                for (int dn = dn_lo; dn <= dn_hi; ++dn)
                    acc += k.at(dm, dn) * h.at(m + dm, n + dn);
            out.at(m, n) = acc;
        }
    }
    return out;
}

Grid2D send_message(const Grid2D& unary, std::span<const Grid2D> incoming,
                    const PairwiseKernel& kernel) {
    Grid2D h = unary;
    for (const Grid2D& in : incoming) {
        if (!in.same_shape(h)) throw std::invalid_argument("incoming message shape mismatch");
        for (size_t i = 0; i < h.v.size(); ++i) h.v[i] *= in.v[i];
    }
    if (h.sum() <= 0.0) throw std::domain_error("degenerate send: sender product is all zero");
    Grid2D m = convolve_message(h, kernel);
    normalize_in_place(m);
    return m;
}

void MessageBuffer::store(size_t send_index, Grid2D m) {
    if (send_index >= messages_.size()) throw std::out_of_range("send index out of range");
    messages_[send_index] = std::move(m);
    ready_[send_index] = 1;
}

const Grid2D& MessageBuffer::at(size_t send_index) const {
    if (send_index >= messages_.size()) throw std::out_of_range("send index out of range");
    if (!ready_[send_index]) throw std::logic_error("message not yet computed");
    return messages_[send_index];
}

const Grid2D& MessageBuffer::at(const MessageSchedule& schedule, KeypointId sender,
                                KeypointId receiver) const {
    int idx = schedule.index_of(sender, receiver);
    if (idx < 0) throw std::invalid_argument("no such directed edge in schedule");
    return at(static_cast<size_t>(idx));
}

bool MessageBuffer::complete() const {
    return std::all_of(ready_.begin(), ready_.end(), [](char c) { return c != 0; });
}

namespace {

void check_inputs(const SkeletonTree& tree, const MessageSchedule& schedule,
                  const GraphicalModel& model, const ConfidenceStack& unaries) {
    if (unaries.layer_count() != tree.node_count())
        throw std::invalid_argument("unary layer count does not match tree");
    unaries.validate_shapes();
    if (model.kernels.size() != schedule.size())
        throw std::invalid_argument("model kernel count does not match schedule");
}

Grid2D floored(const Grid2D& g) {
    Grid2D out = g;
    for (double& x : out.v) x = std::max(x, kKernelFloor);
    return out;
}

// Schedule indices of the messages available to the sender of send e,
// excluding the one from its receiver. The two-pass order guarantees each of
// these precedes e.
std::vector<int> gather_in_sends(const SkeletonTree& tree, const MessageSchedule& schedule,
                                 size_t e) {
    const DirectedEdge& edge = schedule[e];
    std::vector<int> in;
    for (KeypointId k : tree.neighbors(edge.sender)) {
        if (k == edge.receiver) continue;
        int idx = schedule.index_of(k, edge.sender);
        if (idx < 0 || static_cast<size_t>(idx) >= e)
            throw std::logic_error("schedule is not a valid two-pass order");
        in.push_back(idx);
    }
    return in;
}

}  // namespace

ConfidenceStack two_pass_marginals(const SkeletonTree& tree, const MessageSchedule& schedule,
                                   const GraphicalModel& model, const ConfidenceStack& unaries,
                                   const TwoPassOptions& options, TwoPassTrace* trace) {
    check_inputs(tree, schedule, model, unaries);

    std::vector<Grid2D> floored_unaries(unaries.layers.size());
    for (size_t i = 0; i < unaries.layers.size(); ++i) floored_unaries[i] = floored(unaries.layers[i]);

    MessageBuffer buffer(schedule.size());
    if (trace) {
        trace->sends.assign(schedule.size(), SendRecord{});
        trace->nodes.assign(floored_unaries.size(), NodeRecord{});
        trace->normalized_messages = options.normalize_messages;
    }

    for (size_t e = 0; e < schedule.size(); ++e) {
        const DirectedEdge& edge = schedule[e];
        std::vector<int> in = gather_in_sends(tree, schedule, e);
        Grid2D h = floored_unaries[static_cast<size_t>(edge.sender)];
        for (int idx : in) {
            const Grid2D& msg = buffer.at(static_cast<size_t>(idx));
            for (size_t i = 0; i < h.v.size(); ++i) h.v[i] *= msg.v[i];
        }
        Grid2D m = convolve_message(h, model.kernels[e]);
        double s = 1.0;
        if (options.normalize_messages) {
            s = m.sum();
            if (s <= 0.0) throw std::domain_error("message normalization on an all-zero message");
            for (double& x : m.v) x /= s;
        }
        if (trace) {
            SendRecord& rec = trace->sends[e];
            rec.in_sends = std::move(in);
            rec.h = std::move(h);
            rec.m = m;
            rec.norm = s;
        }
        buffer.store(e, std::move(m));
    }

    ConfidenceStack result;
    result.frame = unaries.frame;
    result.layers.resize(floored_unaries.size());
    for (int i = 0; i < tree.node_count(); ++i) {
        Grid2D belief = floored_unaries[static_cast<size_t>(i)];
        std::vector<int> in;
        for (KeypointId k : tree.neighbors(i)) {
            int idx = schedule.index_of(k, i);
            if (idx < 0) throw std::logic_error("schedule is missing a directed edge");
            in.push_back(idx);
            const Grid2D& msg = buffer.at(static_cast<size_t>(idx));
            for (size_t c = 0; c < belief.v.size(); ++c) belief.v[c] *= msg.v[c];
        }
        double s = belief.sum();
        if (s <= 0.0) throw std::domain_error("belief normalization on an all-zero belief");
        Grid2D marginal = belief;
        for (double& x : marginal.v) x /= s;
        if (trace) {
            NodeRecord& rec = trace->nodes[static_cast<size_t>(i)];
            rec.in_sends = std::move(in);
            rec.unary = std::move(floored_unaries[static_cast<size_t>(i)]);
            rec.belief = std::move(belief);
            rec.sum = s;
        }
        result.layers[static_cast<size_t>(i)] = std::move(marginal);
    }
    return result;
}

ConfidenceStack brute_force_marginals(const SkeletonTree& tree, const MessageSchedule& schedule,
                                      const GraphicalModel& model, const ConfidenceStack& unaries) {
    check_inputs(tree, schedule, model, unaries);
    int k_count = tree.node_count();
    int hgt = unaries.layers.front().height;
    int wid = unaries.layers.front().width;
    size_t cells = static_cast<size_t>(hgt) * wid;
    double states = std::pow(static_cast<double>(cells), k_count);
    if (states > 1e7)
        throw std::invalid_argument("state space " + std::to_string(states) + " exceeds 1e7");

    std::vector<Grid2D> floored_unaries(unaries.layers.size());
    for (size_t i = 0; i < unaries.layers.size(); ++i) floored_unaries[i] = floored(unaries.layers[i]);

    // Assign nodes parents-first so each new node couples only to an
    // already-placed one.
    std::vector<int> order;
    order.reserve(static_cast<size_t>(k_count));
    std::vector<int> stack = {tree.root()};
    while (!stack.empty()) {
        int node = stack.back();
        stack.pop_back();
        order.push_back(node);
        for (KeypointId c : tree.children(node)) stack.push_back(c);
    }

    std::vector<const PairwiseKernel*> kernel_of(static_cast<size_t>(k_count), nullptr);
    for (int c = 0; c < k_count; ++c)
        if (c != tree.root()) kernel_of[static_cast<size_t>(c)] = &model.kernel(schedule, tree.parent(c), c);

    std::vector<int> pos(static_cast<size_t>(k_count), 0);
    std::vector<Grid2D> acc(static_cast<size_t>(k_count), Grid2D(hgt, wid));

    auto recurse = [&](auto&& self, size_t depth, double weight) -> void {
        if (weight == 0.0) return;
        if (depth == order.size()) {
            for (int i = 0; i < k_count; ++i) acc[static_cast<size_t>(i)].v[static_cast<size_t>(pos[static_cast<size_t>(i)])] += weight;
            return;
        }
        int node = order[depth];
        const Grid2D& unary = floored_unaries[static_cast<size_t>(node)];
        for (int cell = 0; cell < static_cast<int>(cells); ++cell) {
            double w = weight * unary.v[static_cast<size_t>(cell)];
            if (node != tree.root()) {
                int p = tree.parent(node);
                int pcell = pos[static_cast<size_t>(p)];
                int dm = pcell / wid - cell / wid;
                int dn = pcell % wid - cell % wid;
                const PairwiseKernel& ker = *kernel_of[static_cast<size_t>(node)];
                w *= (std::abs(dm) <= ker.radius && std::abs(dn) <= ker.radius) ? ker.at(dm, dn) : 0.0;
            }
            pos[static_cast<size_t>(node)] = cell;
            self(self, depth + 1, w);
        }
    };
    recurse(recurse, 0, 1.0);

    ConfidenceStack result;
    result.frame = unaries.frame;
    result.layers.resize(static_cast<size_t>(k_count));
    for (int i = 0; i < k_count; ++i) result.layers[static_cast<size_t>(i)] = normalize(acc[static_cast<size_t>(i)]);
    return result;
}

ConfidenceStack mixture_marginals(const SkeletonTree& tree, const MessageSchedule& schedule,
                                  const ModelPool& pool, const MixtureWeights& weights,
                                  const ConfidenceStack& unaries, const TwoPassOptions& options) {
    if (pool.models.empty()) throw std::invalid_argument("empty model pool");
    if (weights.size() != pool.model_count())
        throw std::invalid_argument("weight count does not match pool");
    weights.validate();

    ConfidenceStack result;
    result.frame = unaries.frame;
    result.layers.assign(unaries.layers.size(),
                         Grid2D(unaries.layers.front().height, unaries.layers.front().width));
    for (int l = 0; l < pool.model_count(); ++l) {
        ConfidenceStack per_model =
            two_pass_marginals(tree, schedule, pool.models[static_cast<size_t>(l)], unaries, options);
        double w = weights.w[static_cast<size_t>(l)];
        for (size_t i = 0; i < result.layers.size(); ++i)
            for (size_t c = 0; c < result.layers[i].v.size(); ++c)
                result.layers[i].v[c] += w * per_model.layers[i].v[c];
    }
    return result;
}

ConfidenceStack iterative_marginals(const SkeletonTree& tree, const MessageSchedule& schedule,
                                    const GraphicalModel& model, const ConfidenceStack& unaries,
                                    int iterations) {
    check_inputs(tree, schedule, model, unaries);
    if (iterations <= 0) throw std::invalid_argument("iteration count must be positive");
    int hgt = unaries.layers.front().height;
    int wid = unaries.layers.front().width;
    double uniform = 1.0 / (static_cast<double>(hgt) * wid);

    std::vector<Grid2D> floored_unaries(unaries.layers.size());
    for (size_t i = 0; i < unaries.layers.size(); ++i) floored_unaries[i] = floored(unaries.layers[i]);

    std::vector<Grid2D> cur(schedule.size(), Grid2D(hgt, wid, uniform));
    std::vector<Grid2D> next = cur;
    for (int it = 0; it < iterations; ++it) {
        for (size_t e = 0; e < schedule.size(); ++e) {
            const DirectedEdge& edge = schedule[e];
            Grid2D h = floored_unaries[static_cast<size_t>(edge.sender)];
            for (KeypointId k : tree.neighbors(edge.sender)) {
                if (k == edge.receiver) continue;
                int idx = schedule.index_of(k, edge.sender);
                const Grid2D& msg = cur[static_cast<size_t>(idx)];
                for (size_t c = 0; c < h.v.size(); ++c) h.v[c] *= msg.v[c];
            }
            Grid2D m = convolve_message(h, model.kernels[e]);
            normalize_in_place(m);
            next[e] = std::move(m);
        }
        std::swap(cur, next);
    }

    ConfidenceStack result;
    result.frame = unaries.frame;
    result.layers.resize(unaries.layers.size());
    for (int i = 0; i < tree.node_count(); ++i) {
        Grid2D belief = floored_unaries[static_cast<size_t>(i)];
        for (KeypointId k : tree.neighbors(i)) {
            int idx = schedule.index_of(k, i);
            const Grid2D& msg = cur[static_cast<size_t>(idx)];
            for (size_t c = 0; c < belief.v.size(); ++c) belief.v[c] *= msg.v[c];
        }
        result.layers[static_cast<size_t>(i)] = normalize(belief);
    }
    return result;
}

Prediction predict(const SkeletonTree& tree, const MessageSchedule& schedule, const ModelPool& pool,
                   const MixtureWeights& weights, const ConfidenceStack& unaries, double angle_deg) {
    unaries.validate_shapes();
    ConfidenceStack rotated;
    rotated.frame = Frame::rotated;
    rotated.layers.resize(unaries.layers.size());
    for (size_t i = 0; i < unaries.layers.size(); ++i)
        rotated.layers[i] = rotate_grid(unaries.layers[i], angle_deg);

    ConfidenceStack canonical = mixture_marginals(tree, schedule, pool, weights, rotated);

    Prediction out;
    out.marginals.frame = Frame::original;
    out.marginals.layers.resize(canonical.layers.size());
    out.peaks.resize(canonical.layers.size());
    out.pose.pts.resize(canonical.layers.size());
    for (size_t i = 0; i < canonical.layers.size(); ++i) {
        Grid2D back = rotate_grid(canonical.layers[i], -angle_deg);
        normalize_in_place(back);
        GridIndex peak = argmax_location(back);
        out.marginals.layers[i] = std::move(back);
        out.peaks[i] = peak;
        out.pose.pts[i] = Vec2{static_cast<double>(peak.n), static_cast<double>(peak.m)};
    }
    return out;
}

}  // namespace handgm
