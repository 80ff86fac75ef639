#include "handgm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

#include "binio.hpp"

namespace handgm {

std::vector<double> pose_feature(const Pose& pose, const SkeletonTree& tree,
                                 const MessageSchedule& schedule) {
    if (pose.size() != tree.node_count())
        throw std::invalid_argument("pose size does not match tree");
    std::vector<double> f;
    f.reserve(2 * static_cast<size_t>(tree.node_count() - 1));
    for (size_t e = 0; e < schedule.size(); ++e) {
        const DirectedEdge& edge = schedule[e];
        if (edge.sender == tree.root() || tree.parent(edge.sender) != edge.receiver) continue;
        Vec2 d = pose[edge.sender] - pose[edge.receiver];
        f.push_back(d.x);
        f.push_back(d.y);
    }
    return f;
}

std::vector<double> shape_feature(const Pose& pose, const SkeletonTree& tree,
                                  const MessageSchedule& schedule) {
    std::vector<double> f = pose_feature(pose, tree, schedule);
    double side = tight_pose_box(pose).side;
    if (side <= 0.0) throw std::domain_error("degenerate pose: tight box has zero side");
    for (double& x : f) x /= side;
    return f;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

int nearest_centroid(const std::vector<std::vector<double>>& centroids,
                     std::span<const double> f) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < centroids.size(); ++l) {
        double d = sq_dist(centroids[l], f);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(l);
        }
    }
    return best;
}

}  // namespace

KmeansResult kmeans_fit(std::span<const std::vector<double>> features, int l_count, uint64_t seed,
                        int max_iters) {
    if (l_count <= 0) throw std::invalid_argument("cluster count must be positive");
    if (features.empty()) throw std::invalid_argument("no features to cluster");
    size_t dim = features.front().size();
    for (const auto& f : features)
        if (f.size() != dim) throw std::invalid_argument("features disagree on dimension");

    std::set<std::vector<double>> distinct(features.begin(), features.end());
    if (distinct.size() < static_cast<size_t>(l_count))
        throw std::invalid_argument("need at least " + std::to_string(l_count) +
                                    " distinct features, got " + std::to_string(distinct.size()));

    std::vector<std::vector<double>> centroids;
    centroids.reserve(static_cast<size_t>(l_count));
    std::mt19937_64 rng(seed);
    centroids.push_back(features[rng() % features.size()]);
    while (centroids.size() < static_cast<size_t>(l_count)) {
        size_t farthest = 0;
        double far_d = -1.0;
        for (size_t i = 0; i < features.size(); ++i) {
            double d = sq_dist(centroids[nearest_centroid(centroids, features[i])], features[i]);
            if (d > far_d) {
                far_d = d;
                farthest = i;
            }
        }
        centroids.push_back(features[farthest]);
    }

    KmeansResult result;
    std::vector<int> assign(features.size(), -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<int> next(features.size());
        double distortion = 0.0;
        for (size_t i = 0; i < features.size(); ++i) {
            next[i] = nearest_centroid(centroids, features[i]);
            distortion += sq_dist(centroids[static_cast<size_t>(next[i])], features[i]);
        }
        result.distortion_history.push_back(distortion / static_cast<double>(features.size()));
        if (next == assign) break;
        assign = std::move(next);

        std::vector<std::vector<double>> sums(static_cast<size_t>(l_count),
                                              std::vector<double>(dim, 0.0));
        std::vector<size_t> counts(static_cast<size_t>(l_count), 0);
        for (size_t i = 0; i < features.size(); ++i) {
            auto& s = sums[static_cast<size_t>(assign[i])];
            for (size_t d = 0; d < dim; ++d) s[d] += features[i][d];
            counts[static_cast<size_t>(assign[i])]++;
        }
        for (int l = 0; l < l_count; ++l) {
            if (counts[static_cast<size_t>(l)] == 0) {
                size_t farthest = 0;
                double far_d = -1.0;
                for (size_t i = 0; i < features.size(); ++i) {
                    double d = sq_dist(centroids[static_cast<size_t>(assign[i])], features[i]);
                    if (d > far_d) {
                        far_d = d;
                        farthest = i;
                    }
                }
                centroids[static_cast<size_t>(l)] = features[farthest];
                continue;
            }
            for (size_t d = 0; d < dim; ++d)
                centroids[static_cast<size_t>(l)][d] =
                    sums[static_cast<size_t>(l)][d] / static_cast<double>(counts[static_cast<size_t>(l)]);
        }
    }

    double mean_sq = result.distortion_history.empty() ? 0.0 : result.distortion_history.back();
    result.model.centroids = std::move(centroids);
    result.model.tau = std::max(mean_sq, 1e-9);
    result.assignments = std::move(assign);
    return result;
}

MixtureWeights soft_assign(const ClusterModel& model, std::span<const double> feature) {
    if (model.tau <= 0.0) throw std::domain_error("temperature must be positive");
    if (static_cast<int>(feature.size()) != model.dim())
        throw std::invalid_argument("feature dimension does not match centroids");
    std::vector<double> score(model.centroids.size());
    double best = -std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < model.centroids.size(); ++l) {
        score[l] = -sq_dist(model.centroids[l], feature) / model.tau;
        best = std::max(best, score[l]);
    }
    double sum = 0.0;
    for (double& s : score) {
        s = std::exp(s - best);
        sum += s;
    }
    MixtureWeights w;
    w.w.resize(score.size());
    for (size_t l = 0; l < score.size(); ++l) w.w[l] = score[l] / sum;
    return w;
}

int hard_assign(const ClusterModel& model, std::span<const double> feature) {
    if (static_cast<int>(feature.size()) != model.dim())
        throw std::invalid_argument("feature dimension does not match centroids");
    return nearest_centroid(model.centroids, feature);
}

namespace {

constexpr char kClusterMagic[4] = {'G', 'M', 'K', 'M'};
constexpr uint32_t kClusterVersion = 1;

}  // namespace

void save_clusters(const std::string& path, const ClusterModel& model) {
    if (model.centroids.empty()) throw std::invalid_argument("cannot save an empty cluster model");
    for (const auto& c : model.centroids)
        if (c.size() != model.centroids.front().size())
            throw std::invalid_argument("centroids disagree on dimension");

    binio::write_atomic(path, [&](std::ostream& os) {
        os.write(kClusterMagic, 4);
        binio::put_u32(os, kClusterVersion);
        binio::put_u32(os, static_cast<uint32_t>(model.centroids.size()));
        binio::put_u32(os, static_cast<uint32_t>(model.centroids.front().size()));
        binio::put_f32(os, static_cast<float>(model.tau));
        for (const auto& c : model.centroids)
            for (double x : c) binio::put_f32(os, static_cast<float>(x));
    });
}

ClusterModel load_clusters(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kClusterMagic, 4))
        throw std::runtime_error(path + ": bad magic at byte 0, expected GMKM");
    uint32_t version = binio::get_u32(is, path, "version");
    if (version != kClusterVersion)
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    uint32_t l_count = binio::get_u32(is, path, "cluster count");
    uint32_t dim = binio::get_u32(is, path, "dimension");
    if (l_count == 0 || l_count > 1u << 20) throw std::runtime_error(path + ": implausible cluster count");
    if (dim == 0 || dim > 1u << 20) throw std::runtime_error(path + ": implausible dimension");
    ClusterModel model;
    model.tau = binio::get_f32(is, path, "temperature");
    if (!(model.tau > 0.0)) throw std::runtime_error(path + ": non-positive temperature");
    model.centroids.assign(l_count, std::vector<double>(dim, 0.0));
    for (auto& c : model.centroids)
        for (double& x : c) {
            x = binio::get_f32(is, path, "centroid value");
            if (!std::isfinite(x)) throw std::runtime_error(path + ": non-finite centroid value");
        }
    char extra;
    if (is.read(&extra, 1)) throw std::runtime_error(path + ": trailing bytes after centroids");
    return model;
}

}  // namespace handgm
