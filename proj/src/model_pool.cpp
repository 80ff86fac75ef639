#include "handgm/model_pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "binio.hpp"

namespace handgm {

PairwiseKernel flipped(const PairwiseKernel& k) {
    PairwiseKernel out(k.radius, 0.0);
    for (int dm = -k.radius; dm <= k.radius; ++dm)
        for (int dn = -k.radius; dn <= k.radius; ++dn) out.at(dm, dn) = k.at(-dm, -dn);
    return out;
}

const PairwiseKernel& GraphicalModel::kernel(const MessageSchedule& schedule, KeypointId sender,
                                             KeypointId receiver) const {
    int idx = schedule.index_of(sender, receiver);
    if (idx < 0)
        throw std::invalid_argument("no directed edge " + std::to_string(sender) + "->" +
                                    std::to_string(receiver) + " in schedule");
    return kernels[static_cast<size_t>(idx)];
}

void MixtureWeights::validate() const {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0)) throw std::domain_error("mixture weight is negative or NaN");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::domain_error("mixture weights sum to " + std::to_string(sum) + ", expected 1");
}

MixtureWeights uniform_weights(int l_count) {
    if (l_count <= 0) throw std::invalid_argument("weight count must be positive");
    MixtureWeights mw;
    mw.w.assign(static_cast<size_t>(l_count), 1.0 / l_count);
    return mw;
}

MixtureWeights one_hot_weights(int l_count, int index) {
    if (l_count <= 0) throw std::invalid_argument("weight count must be positive");
    if (index < 0 || index >= l_count) throw std::invalid_argument("one-hot index out of range");
    MixtureWeights mw;
    mw.w.assign(static_cast<size_t>(l_count), 0.0);
    mw.w[static_cast<size_t>(index)] = 1.0;
    return mw;
}

ModelPool init_uniform_pool(const SkeletonTree& tree, const MessageSchedule& schedule, int l_count,
                            int radius) {
    (void)tree;
    if (l_count <= 0) throw std::invalid_argument("model count must be positive");
    if (radius <= 0) throw std::invalid_argument("kernel radius must be positive");
    int side = 2 * radius + 1;
    double fill = 1.0 / (static_cast<double>(side) * side);
    ModelPool pool;
    pool.radius = radius;
    pool.models.assign(static_cast<size_t>(l_count),
                       GraphicalModel{std::vector<PairwiseKernel>(
                           schedule.size(), PairwiseKernel(radius, fill))});
    return pool;
}

namespace {

// Direct 2D convolution with a truncated, normalized Gaussian; zero padding.
void smooth_histogram(PairwiseKernel& k, double sigma) {
    int taps = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> g(static_cast<size_t>(2 * taps + 1));
    double gsum = 0.0;
    for (int t = -taps; t <= taps; ++t) {
        g[static_cast<size_t>(t + taps)] = std::exp(-0.5 * t * t / (sigma * sigma));
        gsum += g[static_cast<size_t>(t + taps)];
    }
    for (double& x : g) x /= gsum;

    int r = k.radius;
    PairwiseKernel tmp(r, 0.0);
    for (int dm = -r; dm <= r; ++dm)
        for (int dn = -r; dn <= r; ++dn) {
            double acc = 0.0;
            for (int t = -taps; t <= taps; ++t)
                if (dn + t >= -r && dn + t <= r) acc += g[static_cast<size_t>(t + taps)] * k.at(dm, dn + t);
            tmp.at(dm, dn) = acc;
        }
    for (int dm = -r; dm <= r; ++dm)
        for (int dn = -r; dn <= r; ++dn) {
            double acc = 0.0;
            for (int t = -taps; t <= taps; ++t)
                if (dm + t >= -r && dm + t <= r) acc += g[static_cast<size_t>(t + taps)] * tmp.at(dm + t, dn);
            k.at(dm, dn) = acc;
        }
}

void floor_and_normalize(PairwiseKernel& k) {
    double sum = 0.0;
    for (double x : k.v) sum += x;
    double floored = 0.0;
    for (double& x : k.v) {
        x = std::max(x / sum, kKernelFloor);
        floored += x;
    }
    // Renormalizing can nudge floor-valued cells a hair below the floor; the
    // final clamp restores them while moving the total by < 1e-12.
    for (double& x : k.v) x = std::max(x / floored, kKernelFloor);
}

}  // namespace

ModelPool init_empirical_pool(const SkeletonTree& tree, const MessageSchedule& schedule,
                              std::span<const Pose> poses, std::span<const int> cluster_ids,
                              int l_count, int radius, double smoothing_sigma) {
    if (poses.size() != cluster_ids.size())
        throw std::invalid_argument("pose and cluster id counts differ");
    if (l_count <= 0) throw std::invalid_argument("model count must be positive");
    if (radius <= 0) throw std::invalid_argument("kernel radius must be positive");
    if (smoothing_sigma <= 0.0) throw std::invalid_argument("smoothing sigma must be positive");

    int side = 2 * radius + 1;
    size_t bins = static_cast<size_t>(side) * side;
    // Integer counts per (model, edge, bin) so the result does not depend on
    // sample order.
    std::vector<std::vector<std::vector<int64_t>>> counts(
        static_cast<size_t>(l_count),
        std::vector<std::vector<int64_t>>(schedule.size(), std::vector<int64_t>(bins, 0)));

    for (size_t s = 0; s < poses.size(); ++s) {
        int l = cluster_ids[s];
        if (l < 0 || l >= l_count) throw std::invalid_argument("cluster id out of range");
        const Pose& pose = poses[s];
        if (static_cast<int>(pose.pts.size()) != tree.node_count())
            throw std::invalid_argument("pose size does not match tree");
        for (size_t e = 0; e < schedule.size(); ++e) {
            const DirectedEdge& edge = schedule[e];
            if (!pose.visible.empty() &&
                !(pose.visible[static_cast<size_t>(edge.sender)] &&
                  pose.visible[static_cast<size_t>(edge.receiver)]))
                continue;
            Vec2 d = pose[edge.sender] - pose[edge.receiver];
            int dm = static_cast<int>(std::lround(d.y));
            int dn = static_cast<int>(std::lround(d.x));
            if (dm < -radius || dm > radius || dn < -radius || dn > radius) continue;
            counts[static_cast<size_t>(l)][e][static_cast<size_t>(dm + radius) * side + (dn + radius)]++;
        }
    }

    ModelPool pool;
    pool.radius = radius;
    pool.models.resize(static_cast<size_t>(l_count));
    double uniform = 1.0 / static_cast<double>(bins);
    for (int l = 0; l < l_count; ++l) {
        GraphicalModel& model = pool.models[static_cast<size_t>(l)];
        model.kernels.assign(schedule.size(), PairwiseKernel(radius, 0.0));
        for (size_t e = 0; e < schedule.size(); ++e) {
            PairwiseKernel& k = model.kernels[e];
            int64_t total = 0;
            for (size_t b = 0; b < bins; ++b) {
                k.v[b] = static_cast<double>(counts[static_cast<size_t>(l)][e][b]);
                total += counts[static_cast<size_t>(l)][e][b];
            }
            if (total == 0) {
                std::cerr << "warning: model " << l << " edge " << schedule[e].sender << "->"
                          << schedule[e].receiver << " has no displacement samples, using uniform\n";
                for (double& x : k.v) x = uniform;
                continue;
            }
            smooth_histogram(k, smoothing_sigma);
            floor_and_normalize(k);
        }
    }
    return pool;
}

void tie_directions(ModelPool& pool, const MessageSchedule& schedule) {
    for (GraphicalModel& model : pool.models) {
        if (model.kernels.size() != schedule.size())
            throw std::invalid_argument("model kernel count does not match schedule");
        for (size_t e = 0; e < schedule.size(); ++e) {
            int rev = schedule.index_of(schedule[e].receiver, schedule[e].sender);
            if (rev < 0 || static_cast<size_t>(rev) <= e) continue;
            model.kernels[static_cast<size_t>(rev)] = flipped(model.kernels[e]);
        }
    }
}

namespace {

constexpr char kPoolMagic[4] = {'G', 'M', 'P', 'K'};
constexpr uint32_t kPoolVersion = 1;

}  // namespace

void save_pool(const std::string& path, const ModelPool& pool) {
    if (pool.models.empty()) throw std::invalid_argument("cannot save an empty pool");
    size_t edge_count = pool.models.front().kernels.size();
    for (const GraphicalModel& model : pool.models) {
        if (model.kernels.size() != edge_count)
            throw std::invalid_argument("models disagree on edge count");
        for (const PairwiseKernel& k : model.kernels)
            if (k.radius != pool.radius)
                throw std::invalid_argument("kernel radius does not match pool radius");
    }

    binio::write_atomic(path, [&](std::ostream& os) {
        os.write(kPoolMagic, 4);
        binio::put_u32(os, kPoolVersion);
        binio::put_u32(os, static_cast<uint32_t>(pool.models.size()));
        binio::put_u32(os, static_cast<uint32_t>(pool.radius));
        binio::put_u32(os, static_cast<uint32_t>(edge_count));
        for (const GraphicalModel& model : pool.models)
            for (const PairwiseKernel& k : model.kernels)
                for (double x : k.v) binio::put_f32(os, static_cast<float>(x));
    });
}

ModelPool load_pool(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kPoolMagic, 4))
        throw std::runtime_error(path + ": bad magic at byte 0, expected GMPK");
    uint32_t version = binio::get_u32(is, path, "version");
    if (version != kPoolVersion)
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    uint32_t l_count = binio::get_u32(is, path, "model count");
    uint32_t radius = binio::get_u32(is, path, "radius");
    uint32_t edge_count = binio::get_u32(is, path, "edge count");
    if (l_count == 0 || l_count > 1u << 20) throw std::runtime_error(path + ": implausible model count");
    if (radius == 0 || radius > 1024) throw std::runtime_error(path + ": implausible radius");
    if (edge_count == 0 || edge_count > 1u << 20)
        throw std::runtime_error(path + ": implausible edge count");

    ModelPool pool;
    pool.radius = static_cast<int>(radius);
    pool.models.resize(l_count);
    for (uint32_t l = 0; l < l_count; ++l) {
        pool.models[l].kernels.assign(edge_count, PairwiseKernel(pool.radius, 0.0));
        for (uint32_t e = 0; e < edge_count; ++e)
            for (double& x : pool.models[l].kernels[e].v)
                x = binio::get_f32(is, path, "kernel value");
    }
    char extra;
    if (is.read(&extra, 1))
        throw std::runtime_error(path + ": trailing bytes after kernel data");
    return pool;
}

}  // namespace handgm
