#include "handgm/learning.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace handgm {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epoch count must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("moment coefficients must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(kernel_floor > 0.0)) throw std::invalid_argument("kernel floor must be positive");
    if (!(target_sigma > 0.0)) throw std::invalid_argument("target sigma must be positive");
    if (threads < 1) throw std::invalid_argument("thread count must be >= 1");
}

GmLossReport gm_loss(const ConfidenceStack& predicted, const ConfidenceStack& targets) {
    if (predicted.layer_count() != targets.layer_count())
        throw std::invalid_argument("layer counts differ");
    predicted.validate_shapes();
    targets.validate_shapes();
    GmLossReport report;
    report.per_keypoint.resize(predicted.layers.size());
    for (size_t i = 0; i < predicted.layers.size(); ++i) {
        const Grid2D& p = predicted.layers[i];
        const Grid2D& t = targets.layers[i];
        if (!p.same_shape(t)) throw std::invalid_argument("layer dimensions differ");
        double acc = 0.0;
        for (size_t c = 0; c < p.v.size(); ++c) {
            double d = p.v[c] - t.v[c];
            acc += d * d;
        }
        report.per_keypoint[i] = acc;
        report.loss += acc;
    }
    return report;
}

PoolGradient zero_gradient(const ModelPool& pool) {
    PoolGradient g;
    g.models.resize(pool.models.size());
    for (size_t l = 0; l < pool.models.size(); ++l)
        g.models[l].kernels.assign(pool.models[l].kernels.size(),
                                   PairwiseKernel(pool.radius, 0.0));
    return g;
}

ConfidenceStack render_targets(const Pose& truth, int height, int width, double sigma) {
    ConfidenceStack targets;
    targets.frame = Frame::original;
    targets.layers.reserve(truth.pts.size());
    for (const Vec2& p : truth.pts)
        targets.layers.push_back(render_gaussian(height, width, p, sigma, true));
    return targets;
}

namespace {

// y = x / s with s = sum(x): g_x = (g_y - <g_y, y>) / s.
Grid2D normalize_adjoint(const Grid2D& g_y, const Grid2D& y, double s) {
    double dot = 0.0;
    for (size_t c = 0; c < y.v.size(); ++c) dot += g_y.v[c] * y.v[c];
    Grid2D g_x(y.height, y.width);
    for (size_t c = 0; c < y.v.size(); ++c) g_x.v[c] = (g_y.v[c] - dot) / s;
    return g_x;
}

// raw = convolve_message(h, k): accumulates both input adjoints.
void convolve_adjoint(const Grid2D& g_raw, const Grid2D& h, const PairwiseKernel& k,
                      PairwiseKernel& g_k, Grid2D& g_h) {
    int r = k.radius;
    for (int m = 0; m < h.height; ++m) {
        int dm_lo = std::max(-r, -m);
        int dm_hi = std::min(r, h.height - 1 - m);
        for (int n = 0; n < h.width; ++n) {
            double gr = g_raw.at(m, n);
            if (gr == 0.0) continue;
            int dn_lo = std::max(-r, -n);
            int dn_hi = std::min(r, h.width - 1 - n);
            for (int dm = dm_lo; dm <= dm_hi; ++dm)
                for (int dn = dn_lo; dn <= dn_hi; ++dn) {
                    g_k.at(dm, dn) += gr * h.at(m + dm, n + dn);
                    g_h.at(m + dm, n + dn) += gr * k.at(dm, dn);
                }
        }
    }
}

// prod = Π factors: returns g_factor[t] = g_prod ⊙ Π_{u≠t} factors[u] via
// prefix/suffix products.
std::vector<Grid2D> product_adjoints(const std::vector<const Grid2D*>& factors,
                                     const Grid2D& g_prod) {
    size_t f_count = factors.size();
    std::vector<Grid2D> out(f_count);
    Grid2D suffix(g_prod.height, g_prod.width, 1.0);
    for (size_t t = f_count; t-- > 0;) {
        out[t] = suffix;
        for (size_t c = 0; c < suffix.v.size(); ++c) suffix.v[c] *= factors[t]->v[c];
    }
    Grid2D prefix(g_prod.height, g_prod.width, 1.0);
    for (size_t t = 0; t < f_count; ++t) {
        for (size_t c = 0; c < g_prod.v.size(); ++c) out[t].v[c] *= prefix.v[c] * g_prod.v[c];
        for (size_t c = 0; c < g_prod.v.size(); ++c) prefix.v[c] *= factors[t]->v[c];
    }
    return out;
}

// Reverse pass over one model's recorded two-pass run, given the gradient of
// the loss with respect to that model's normalized marginals.
void two_pass_backward(const MessageSchedule& schedule, const GraphicalModel& model,
                       const TwoPassTrace& trace, const std::vector<Grid2D>& g_marginals,
                       GraphicalModel& grad) {
    int hgt = trace.nodes.front().unary.height;
    int wid = trace.nodes.front().unary.width;
    std::vector<Grid2D> g_msg(schedule.size(), Grid2D(hgt, wid));

    for (size_t i = 0; i < trace.nodes.size(); ++i) {
        const NodeRecord& rec = trace.nodes[i];
        Grid2D marginal = rec.belief;
        for (double& x : marginal.v) x /= rec.sum;
        Grid2D g_belief = normalize_adjoint(g_marginals[i], marginal, rec.sum);

        std::vector<const Grid2D*> factors;
        factors.push_back(&rec.unary);
        for (int idx : rec.in_sends) factors.push_back(&trace.sends[static_cast<size_t>(idx)].m);
        std::vector<Grid2D> adj = product_adjoints(factors, g_belief);
        for (size_t t = 0; t < rec.in_sends.size(); ++t) {
            Grid2D& dst = g_msg[static_cast<size_t>(rec.in_sends[t])];
            const Grid2D& src = adj[t + 1];
            for (size_t c = 0; c < dst.v.size(); ++c) dst.v[c] += src.v[c];
        }
    }

    for (size_t e = trace.sends.size(); e-- > 0;) {
        const SendRecord& rec = trace.sends[e];
        Grid2D g_raw = trace.normalized_messages ? normalize_adjoint(g_msg[e], rec.m, rec.norm)
                                                 : std::move(g_msg[e]);
        Grid2D g_h(hgt, wid);
        convolve_adjoint(g_raw, rec.h, model.kernels[e], grad.kernels[e], g_h);

        if (rec.in_sends.empty()) continue;
        KeypointId sender = schedule[e].sender;
        std::vector<const Grid2D*> factors;
        factors.push_back(&trace.nodes[static_cast<size_t>(sender)].unary);
        for (int idx : rec.in_sends) factors.push_back(&trace.sends[static_cast<size_t>(idx)].m);
        std::vector<Grid2D> adj = product_adjoints(factors, g_h);
        for (size_t t = 0; t < rec.in_sends.size(); ++t) {
            Grid2D& dst = g_msg[static_cast<size_t>(rec.in_sends[t])];
            const Grid2D& src = adj[t + 1];
            for (size_t c = 0; c < dst.v.size(); ++c) dst.v[c] += src.v[c];
        }
    }
}

}  // namespace

GmLossReport gm_grad(const SkeletonTree& tree, const MessageSchedule& schedule,
                     const ModelPool& pool, const MixtureWeights& weights,
                     const ConfidenceStack& unaries, double angle_deg,
                     const ConfidenceStack& targets, PoolGradient& grad) {
    if (pool.models.empty()) throw std::invalid_argument("empty model pool");
    if (weights.size() != pool.model_count())
        throw std::invalid_argument("weight count does not match pool");
    weights.validate();
    if (grad.models.size() != pool.models.size())
        throw std::invalid_argument("gradient accumulator shape does not match pool");
    unaries.validate_shapes();
    if (targets.layer_count() != unaries.layer_count())
        throw std::invalid_argument("target layer count does not match unaries");

    ConfidenceStack rotated;
    rotated.frame = Frame::rotated;
    rotated.layers.resize(unaries.layers.size());
    for (size_t i = 0; i < unaries.layers.size(); ++i)
        rotated.layers[i] = rotate_grid(unaries.layers[i], angle_deg);

    size_t l_count = pool.models.size();
    std::vector<TwoPassTrace> traces(l_count);
    std::vector<ConfidenceStack> per_model(l_count);
    for (size_t l = 0; l < l_count; ++l)
        per_model[l] = two_pass_marginals(tree, schedule, pool.models[l], rotated, {}, &traces[l]);

    size_t node_count = unaries.layers.size();
    ConfidenceStack predicted;
    predicted.frame = Frame::original;
    predicted.layers.resize(node_count);
    std::vector<Grid2D> g_mix(node_count);
    for (size_t i = 0; i < node_count; ++i) {
        Grid2D mix(rotated.layers[i].height, rotated.layers[i].width);
        for (size_t l = 0; l < l_count; ++l) {
            double w = weights.w[l];
            for (size_t c = 0; c < mix.v.size(); ++c) mix.v[c] += w * per_model[l].layers[i].v[c];
        }
        Grid2D back = rotate_grid(mix, -angle_deg);
        double s = back.sum();
        if (s <= 0.0) throw std::domain_error("rotated marginal has no mass");
        Grid2D final = back;
        for (double& x : final.v) x /= s;

        const Grid2D& t = targets.layers[i];
        if (!final.same_shape(t)) throw std::invalid_argument("target dimensions differ");
        Grid2D g_final(final.height, final.width);
        for (size_t c = 0; c < final.v.size(); ++c) g_final.v[c] = 2.0 * (final.v[c] - t.v[c]);
        Grid2D g_back = normalize_adjoint(g_final, final, s);
        g_mix[i] = rotate_grid_adjoint(g_back, -angle_deg);
        predicted.layers[i] = std::move(final);
    }

    GmLossReport report = gm_loss(predicted, targets);

    std::vector<Grid2D> g_marginals(node_count);
    for (size_t l = 0; l < l_count; ++l) {
        double w = weights.w[l];
        for (size_t i = 0; i < node_count; ++i) {
            g_marginals[i] = g_mix[i];
            for (double& x : g_marginals[i].v) x *= w;
        }
        two_pass_backward(schedule, pool.models[l], traces[l], g_marginals, grad.models[l]);
    }
    return report;
}

TrainResult train_gm(const SkeletonTree& tree, const MessageSchedule& schedule,
                     const ModelPool& init, std::span<const TrainSample> data,
                     const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("empty training set");
    if (init.models.empty()) throw std::invalid_argument("empty model pool");

    int hgt = data.front().unaries.layers.front().height;
    int wid = data.front().unaries.layers.front().width;
    std::vector<ConfidenceStack> targets;
    targets.reserve(data.size());
    for (const TrainSample& s : data) {
        s.unaries.validate_shapes();
        if (s.unaries.layer_count() != tree.node_count())
            throw std::invalid_argument("sample " + s.id + ": unary layer count does not match tree");
        if (s.unaries.layers.front().height != hgt || s.unaries.layers.front().width != wid)
            throw std::invalid_argument("sample " + s.id + ": grid dimensions differ across samples");
        targets.push_back(render_targets(s.truth, hgt, wid, cfg.target_sigma));
    }

    TrainResult result;
    result.pool = init;
    PoolGradient moment1 = zero_gradient(init);
    PoolGradient moment2 = zero_gradient(init);
    long long step = 0;

    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch + 1)));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t count = std::min(static_cast<size_t>(cfg.batch_size), order.size() - start);
            std::vector<PoolGradient> slots(count);
            std::vector<double> losses(count, 0.0);

            auto worker = [&](size_t lo, size_t hi) {
                for (size_t i = lo; i < hi; ++i) {
                    const TrainSample& s = data[order[start + i]];
                    slots[i] = zero_gradient(result.pool);
                    losses[i] = gm_grad(tree, schedule, result.pool, s.weights, s.unaries,
                                        s.angle_deg, targets[order[start + i]], slots[i])
                                    .loss;
                }
            };
            size_t worker_count = std::min<size_t>(static_cast<size_t>(cfg.threads), count);
            if (worker_count <= 1) {
                worker(0, count);
            } else {
                std::vector<std::thread> pool_threads;
                size_t chunk = (count + worker_count - 1) / worker_count;
                for (size_t w = 0; w < worker_count; ++w) {
                    size_t lo = w * chunk;
                    size_t hi = std::min(count, lo + chunk);
                    if (lo < hi) pool_threads.emplace_back(worker, lo, hi);
                }
                for (std::thread& t : pool_threads) t.join();
            }

            PoolGradient batch_grad = zero_gradient(result.pool);
            for (size_t i = 0; i < count; ++i) {
                if (!std::isfinite(losses[i]))
                    throw std::runtime_error("non-finite loss at sample " + data[order[start + i]].id);
                epoch_loss += losses[i];
                for (size_t l = 0; l < batch_grad.models.size(); ++l)
                    for (size_t e = 0; e < batch_grad.models[l].kernels.size(); ++e) {
                        auto& dst = batch_grad.models[l].kernels[e].v;
                        const auto& src = slots[i].models[l].kernels[e].v;
                        for (size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
                    }
            }
            double inv = 1.0 / static_cast<double>(count);

            ++step;
            double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (size_t l = 0; l < result.pool.models.size(); ++l)
                for (size_t e = 0; e < result.pool.models[l].kernels.size(); ++e) {
                    auto& theta = result.pool.models[l].kernels[e].v;
                    auto& m1 = moment1.models[l].kernels[e].v;
                    auto& m2 = moment2.models[l].kernels[e].v;
                    const auto& g = batch_grad.models[l].kernels[e].v;
                    for (size_t c = 0; c < theta.size(); ++c) {
                        double gc = g[c] * inv;
                        m1[c] = cfg.beta1 * m1[c] + (1.0 - cfg.beta1) * gc;
                        m2[c] = cfg.beta2 * m2[c] + (1.0 - cfg.beta2) * gc * gc;
                        double mhat = m1[c] / bc1;
                        double vhat = m2[c] / bc2;
                        theta[c] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
                        theta[c] = std::max(theta[c], cfg.kernel_floor);
                    }
                }
        }
        result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    return result;
}

}  // namespace handgm
