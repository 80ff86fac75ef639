#include "handgm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "binio.hpp"
#include "handgm/clustering.hpp"
#include "handgm/formats.hpp"
#include "handgm/inference.hpp"
#include "handgm/learning.hpp"
#include "handgm/model_pool.hpp"
#include "handgm/pck.hpp"
#include "handgm/synth.hpp"

namespace handgm {

namespace {

AngleProvider make_angle_provider(const std::string& mode, double noise_sigma, uint64_t seed) {
    if (mode == "zero") return make_zero_angle_provider();
    return make_oracle_angle_provider(noise_sigma, seed);
}

void check_hand_annotation(const Annotation& a, const SkeletonTree& tree) {
    if (a.keypoints.size() != tree.node_count())
        throw std::runtime_error("sample " + a.sample_id + " has " +
                                 std::to_string(a.keypoints.size()) + " keypoints, expected " +
                                 std::to_string(tree.node_count()));
}

void check_pool_matches(const ModelPool& pool, const MessageSchedule& schedule) {
    for (const GraphicalModel& m : pool.models)
        if (m.kernels.size() != schedule.size())
            throw std::runtime_error("pool has " + std::to_string(m.kernels.size()) +
                                     " directed-edge kernels, expected " +
                                     std::to_string(schedule.size()) + " for the hand tree");
}

std::vector<double> canonical_shape_feature(const Pose& pixel_pose, double angle_deg,
                                            const SkeletonTree& tree,
                                            const MessageSchedule& schedule) {
    Pose rotated = rotate_points(pixel_pose, angle_deg, pose_centroid(pixel_pose));
    return shape_feature(rotated, tree, schedule);
}

Pose argmax_pixel_pose(const ConfidenceStack& unaries, const BoundingBox& box) {
    Pose pose;
    pose.pts.reserve(unaries.layers.size());
    int wid = unaries.layers.front().width;
    int hgt = unaries.layers.front().height;
    for (const Grid2D& layer : unaries.layers) {
        GridIndex peak = argmax_location(layer);
        pose.pts.push_back(grid_to_box(
            Vec2{static_cast<double>(peak.n), static_cast<double>(peak.m)}, box, wid, hgt));
    }
    return pose;
}

MixtureWeights sample_weights(const std::optional<ClusterModel>& clusters, const Pose& pixel_pose,
                              double angle_deg, int pool_size, const SkeletonTree& tree,
                              const MessageSchedule& schedule) {
    if (!clusters) return uniform_weights(pool_size);
    return soft_assign(*clusters, canonical_shape_feature(pixel_pose, angle_deg, tree, schedule));
}

struct SynthArgs {
    SynthConfig cfg;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& args) {
    std::vector<Sample> samples = generate_dataset(args.cfg);
    write_dataset(args.out_dir, samples);
    std::cout << "wrote " << samples.size() << " samples to " << args.out_dir << "\n";
    return 0;
}

struct ClusterArgs {
    std::string data_dir;
    std::string out_path;
    int clusters = 4;
    uint64_t seed = 0;
    int max_iters = 100;
};

int cmd_cluster(const ClusterArgs& args) {
    SkeletonTree tree = build_default_hand_tree();
    MessageSchedule schedule = message_schedule(tree);
    std::vector<DatasetEntry> entries = read_dataset(args.data_dir);
    std::vector<std::vector<double>> features;
    features.reserve(entries.size());
    for (const DatasetEntry& e : entries) {
        check_hand_annotation(e.annotation, tree);
        AlignedPose aligned = align_pose(e.annotation.keypoints);
        features.push_back(shape_feature(aligned.pose, tree, schedule));
    }
    KmeansResult km = kmeans_fit(features, args.clusters, args.seed, args.max_iters);
    save_clusters(args.out_path, km.model);
    std::cout << "fit " << args.clusters << " clusters on " << features.size()
              << " poses in " << km.distortion_history.size() << " iterations, distortion "
              << km.distortion_history.back() << ", tau " << km.model.tau << "\n";
    return 0;
}

struct InitArgs {
    std::string data_dir;
    std::string clusters_path;  // empty: single model
    std::string out_path;
    int radius = 11;
    double smoothing = 1.0;
    std::string angle_mode = "oracle";
    double angle_noise = 0.0;
    uint64_t seed = 0;
};

int cmd_init(const InitArgs& args) {
    SkeletonTree tree = build_default_hand_tree();
    MessageSchedule schedule = message_schedule(tree);
    std::vector<DatasetEntry> entries = read_dataset(args.data_dir);
    std::optional<ClusterModel> clusters;
    if (!args.clusters_path.empty()) clusters = load_clusters(args.clusters_path);
    AngleProvider provider = make_angle_provider(args.angle_mode, args.angle_noise, args.seed);

    std::vector<Pose> grid_poses;
    std::vector<int> ids;
    grid_poses.reserve(entries.size());
    ids.reserve(entries.size());
    for (const DatasetEntry& e : entries) {
        check_hand_annotation(e.annotation, tree);
        Sample s = to_sample(e);
        double angle = provider(s);
        const Grid2D& layer = s.unaries.layers.front();
        Vec2 grid_center{(layer.width - 1) / 2.0, (layer.height - 1) / 2.0};
        grid_poses.push_back(rotate_points(grid_truth(s), angle, grid_center));
        int id = 0;
        if (clusters)
            id = hard_assign(*clusters,
                             canonical_shape_feature(s.truth, angle, tree, schedule));
        ids.push_back(id);
    }
    int l_count = clusters ? clusters->cluster_count() : 1;
    ModelPool pool =
        init_empirical_pool(tree, schedule, grid_poses, ids, l_count, args.radius, args.smoothing);
    save_pool(args.out_path, pool);
    std::cout << "initialized pool: " << l_count << " models, radius " << args.radius << ", from "
              << entries.size() << " samples\n";
    return 0;
}

struct TrainArgs {
    std::string data_dir;
    std::string pool_path;
    std::string clusters_path;
    std::string out_path;
    std::string loss_csv;
    TrainConfig cfg;
    std::string angle_mode = "oracle";
    double angle_noise = 0.0;
};

int cmd_train(const TrainArgs& args) {
    SkeletonTree tree = build_default_hand_tree();
    MessageSchedule schedule = message_schedule(tree);
    ModelPool pool = load_pool(args.pool_path);
    check_pool_matches(pool, schedule);
    std::optional<ClusterModel> clusters;
    if (!args.clusters_path.empty()) {
        clusters = load_clusters(args.clusters_path);
        if (clusters->cluster_count() != pool.model_count())
            throw std::runtime_error("pool has " + std::to_string(pool.model_count()) +
                                     " models but cluster model has " +
                                     std::to_string(clusters->cluster_count()) + " centroids");
    }
    AngleProvider provider = make_angle_provider(args.angle_mode, args.angle_noise, args.cfg.seed);

    std::vector<DatasetEntry> entries = read_dataset(args.data_dir);
    std::vector<TrainSample> data;
    data.reserve(entries.size());
    for (DatasetEntry& e : entries) {
        check_hand_annotation(e.annotation, tree);
        Sample s = to_sample(e);
        TrainSample t;
        t.id = s.id;
        t.truth = grid_truth(s);
        t.angle_deg = provider(s);
        t.weights = sample_weights(clusters, s.truth, t.angle_deg, pool.model_count(), tree, schedule);
        t.unaries = std::move(s.unaries);
        data.push_back(std::move(t));
    }

    TrainResult result = train_gm(tree, schedule, pool, data, args.cfg);
    save_pool(args.out_path, result.pool);
    std::ostringstream csv;
    csv << "epoch,mean_loss\n";
    for (size_t i = 0; i < result.epoch_mean_loss.size(); ++i) {
        csv << i + 1 << "," << std::setprecision(17) << result.epoch_mean_loss[i] << "\n";
        std::cout << "epoch " << i + 1 << " mean loss " << result.epoch_mean_loss[i] << "\n";
    }
    if (!args.loss_csv.empty())
        binio::write_atomic(args.loss_csv, [&](std::ostream& os) { os << csv.str(); });
    return 0;
}

struct InferArgs {
    std::string data_dir;
    std::string pool_path;
    std::string clusters_path;
    std::string out_path;
    std::string angle_mode = "oracle";
    double angle_noise = 0.0;
    uint64_t seed = 0;
    int threads = 1;
};

int cmd_infer(const InferArgs& args) {
    SkeletonTree tree = build_default_hand_tree();
    MessageSchedule schedule = message_schedule(tree);
    ModelPool pool = load_pool(args.pool_path);
    check_pool_matches(pool, schedule);
    std::optional<ClusterModel> clusters;
    if (!args.clusters_path.empty()) {
        clusters = load_clusters(args.clusters_path);
        if (clusters->cluster_count() != pool.model_count())
            throw std::runtime_error("pool has " + std::to_string(pool.model_count()) +
                                     " models but cluster model has " +
                                     std::to_string(clusters->cluster_count()) + " centroids");
    }
    AngleProvider provider = make_angle_provider(args.angle_mode, args.angle_noise, args.seed);

    std::vector<DatasetEntry> entries = read_dataset(args.data_dir);
    std::vector<Annotation> predictions(entries.size());
    auto worker = [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            const DatasetEntry& e = entries[i];
            check_hand_annotation(e.annotation, tree);
            Sample s = to_sample(e);
            double angle = provider(s);
            Pose guess = argmax_pixel_pose(s.unaries, s.box);
            MixtureWeights weights =
                sample_weights(clusters, guess, angle, pool.model_count(), tree, schedule);
            Prediction pred = predict(tree, schedule, pool, weights, s.unaries, angle);
            const Grid2D& layer = s.unaries.layers.front();
            Annotation out;
            out.sample_id = s.id;
            out.box = s.box;
            out.keypoints = grid_to_box(pred.pose, s.box, layer.width, layer.height);
            predictions[i] = std::move(out);
        }
    };
    size_t worker_count = std::min<size_t>(static_cast<size_t>(std::max(args.threads, 1)),
                                           entries.size());
    if (worker_count <= 1) {
        worker(0, entries.size());
    } else {
        std::vector<std::thread> pool_threads;
        size_t chunk = (entries.size() + worker_count - 1) / worker_count;
        for (size_t w = 0; w < worker_count; ++w) {
            size_t lo = w * chunk;
            size_t hi = std::min(entries.size(), lo + chunk);
            if (lo < hi) pool_threads.emplace_back(worker, lo, hi);
        }
        for (std::thread& t : pool_threads) t.join();
    }
    write_annotations(args.out_path, predictions);
    std::cout << "wrote " << predictions.size() << " predictions to " << args.out_path << "\n";
    return 0;
}

struct EvalArgs {
    std::string pred_path;
    std::string truth_dir;
    std::string baseline;  // empty or "unary-argmax"
};

void print_report_rows(std::ostream& os, const PckReport& main,
                       const PckReport* baseline) {
    os << std::left << std::setw(8) << "sigma" << std::right << std::setw(10) << "mixture";
    if (baseline) os << std::setw(14) << "unary-argmax";
    os << "\n" << std::fixed << std::setprecision(2);
    for (size_t t = 0; t < main.thresholds.size(); ++t) {
        os << std::left << std::setw(8) << std::setprecision(2) << main.thresholds[t]
           << std::right << std::setw(10) << 100.0 * main.pck[t];
        if (baseline) os << std::setw(14) << 100.0 * baseline->pck[t];
        os << "\n";
    }
    os << std::left << std::setw(8) << "mPCK" << std::right << std::setw(10) << 100.0 * main.mpck;
    if (baseline) os << std::setw(14) << 100.0 * baseline->mpck;
    os << "\n";
    os << std::left << std::setw(8) << "samples" << std::right << std::setw(10)
       << main.sample_count << "\n";
}

int cmd_eval(const EvalArgs& args) {
    SkeletonTree tree = build_default_hand_tree();
    std::vector<Annotation> preds = read_annotations(args.pred_path);
    std::vector<DatasetEntry> truth_entries = read_dataset(args.truth_dir);
    std::map<std::string, const DatasetEntry*> by_id;
    for (const DatasetEntry& e : truth_entries) by_id[e.annotation.sample_id] = &e;

    std::vector<Pose> predicted, truths, baseline_poses;
    std::vector<BoundingBox> boxes;
    for (const Annotation& p : preds) {
        auto it = by_id.find(p.sample_id);
        if (it == by_id.end())
            throw std::runtime_error("prediction " + p.sample_id + " has no ground truth in " +
                                     args.truth_dir);
        check_hand_annotation(p, tree);
        check_hand_annotation(it->second->annotation, tree);
        predicted.push_back(p.keypoints);
        truths.push_back(it->second->annotation.keypoints);
        boxes.push_back(it->second->annotation.box);
        if (!args.baseline.empty())
            baseline_poses.push_back(
                argmax_pixel_pose(it->second->unaries, it->second->annotation.box));
    }

    PckReport main = pck(predicted, truths, boxes);
    std::optional<PckReport> base;
    if (!args.baseline.empty()) base = pck(baseline_poses, truths, boxes);
    print_report_rows(std::cout, main, base ? &*base : nullptr);

    nlohmann::json rec;
    rec["type"] = "pck_report";
    rec["samples"] = main.sample_count;
    rec["thresholds"] = main.thresholds;
    rec["pck"] = main.pck;
    rec["mpck"] = main.mpck;
    if (base) {
        rec["baseline"] = {{"name", args.baseline}, {"pck", base->pck}, {"mpck", base->mpck}};
    }
    std::cout << rec.dump() << "\n";
    return 0;
}

// CLI11 reads --config files only for the root command object, so each
// subcommand applies its own file here after parsing. Entries never override
// values given as explicit command-line flags.
void apply_config_file(CLI::App& sub) {
    CLI::Option* cfg = sub.get_config_ptr();
    if (cfg == nullptr || cfg->count() == 0) return;
    const std::string path = cfg->as<std::string>();
    for (const CLI::ConfigItem& item : sub.get_config_formatter()->from_file(path)) {
        const std::string name = item.fullname();
        CLI::Option* op = sub.get_option_no_throw("--" + name);
        if (op == nullptr)
            throw std::runtime_error(path + ": unknown option '" + name + "'");
        if (op == cfg || op->count() > 0) continue;
        op->add_result(item.inputs);
        op->run_callback();
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Hand keypoint estimation with rotation-canonicalized mixtures of tree "
                 "graphical models on synthetic data"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--out", synth_args.out_dir, "output dataset directory")->required();
    synth->add_option("--samples", synth_args.cfg.sample_count, "number of samples")
        ->capture_default_str();
    synth->add_option("--prototypes", synth_args.cfg.prototype_count, "hand shape prototypes")
        ->capture_default_str();
    synth->add_option("--grid-h", synth_args.cfg.grid_h, "heatmap height")->capture_default_str();
    synth->add_option("--grid-w", synth_args.cfg.grid_w, "heatmap width")->capture_default_str();
    synth->add_option("--pose-sigma", synth_args.cfg.pose_sigma, "joint jitter, grid cells")
        ->capture_default_str();
    synth->add_option("--rot-range", synth_args.cfg.rotation_range_deg,
                      "global rotation range, degrees")
        ->capture_default_str();
    synth->add_option("--p-drop", synth_args.cfg.p_drop, "keypoint drop probability")
        ->capture_default_str();
    synth->add_option("--p-distract", synth_args.cfg.p_distract,
                      "neighbor-finger distractor probability")
        ->capture_default_str();
    synth->add_option("--jitter-sigma", synth_args.cfg.jitter_sigma, "peak jitter, grid cells")
        ->capture_default_str();
    synth->add_option("--unary-sigma", synth_args.cfg.unary_sigma, "peak width, grid cells")
        ->capture_default_str();
    synth->add_option("--seed", synth_args.cfg.seed, "rng seed")->capture_default_str();
    synth->set_config("--config");

    ClusterArgs cluster_args;
    CLI::App* cluster = app.add_subcommand("cluster", "fit pose shape clusters");
    cluster->add_option("--data", cluster_args.data_dir, "dataset directory")->required();
    cluster->add_option("--clusters", cluster_args.clusters, "cluster count")
        ->capture_default_str();
    cluster->add_option("--out", cluster_args.out_path, "output .gmkm path")->required();
    cluster->add_option("--seed", cluster_args.seed, "rng seed")->capture_default_str();
    cluster->add_option("--max-iters", cluster_args.max_iters, "iteration cap")
        ->capture_default_str();
    cluster->set_config("--config");

    InitArgs init_args;
    CLI::App* init = app.add_subcommand("init", "empirical kernel initialization");
    init->add_option("--data", init_args.data_dir, "dataset directory")->required();
    init->add_option("--clusters", init_args.clusters_path, "cluster model (.gmkm); omit for L=1");
    init->add_option("--out", init_args.out_path, "output .gmpk path")->required();
    init->add_option("--radius", init_args.radius, "kernel radius, cells")->capture_default_str();
    init->add_option("--smoothing", init_args.smoothing, "histogram smoothing sigma")
        ->capture_default_str();
    init->add_option("--angle", init_args.angle_mode, "canonicalization angle source")
        ->check(CLI::IsMember({"oracle", "zero"}))
        ->capture_default_str();
    init->add_option("--angle-noise", init_args.angle_noise, "oracle angle noise, degrees")
        ->capture_default_str();
    init->add_option("--seed", init_args.seed, "rng seed for angle noise")->capture_default_str();
    init->set_config("--config");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train pool kernels");
    train->add_option("--data", train_args.data_dir, "dataset directory")->required();
    train->add_option("--pool", train_args.pool_path, "initial pool (.gmpk)")->required();
    train->add_option("--clusters", train_args.clusters_path,
                      "cluster model (.gmkm); omit for uniform weights");
    train->add_option("--out", train_args.out_path, "output .gmpk path")->required();
    train->add_option("--loss-csv", train_args.loss_csv, "write per-epoch loss history here");
    train->add_option("--lr", train_args.cfg.learning_rate, "learning rate")
        ->capture_default_str();
    train->add_option("--epochs", train_args.cfg.epochs, "epoch count")->capture_default_str();
    train->add_option("--batch", train_args.cfg.batch_size, "batch size")->capture_default_str();
    train->add_option("--target-sigma", train_args.cfg.target_sigma,
                      "ground-truth Gaussian width, cells")
        ->capture_default_str();
    train->add_option("--threads", train_args.cfg.threads, "worker threads")
        ->capture_default_str();
    train->add_option("--seed", train_args.cfg.seed, "rng seed")->capture_default_str();
    train->add_option("--angle", train_args.angle_mode, "canonicalization angle source")
        ->check(CLI::IsMember({"oracle", "zero"}))
        ->capture_default_str();
    train->add_option("--angle-noise", train_args.angle_noise, "oracle angle noise, degrees")
        ->capture_default_str();
    train->set_config("--config");

    InferArgs infer_args;
    CLI::App* infer = app.add_subcommand("infer", "predict keypoints for a dataset");
    infer->add_option("--data", infer_args.data_dir, "dataset directory")->required();
    infer->add_option("--pool", infer_args.pool_path, "pool (.gmpk)")->required();
    infer->add_option("--clusters", infer_args.clusters_path,
                      "cluster model (.gmkm); omit for uniform weights");
    infer->add_option("--out", infer_args.out_path, "output predictions (.jsonl)")->required();
    infer->add_option("--angle", infer_args.angle_mode, "canonicalization angle source")
        ->check(CLI::IsMember({"oracle", "zero"}))
        ->capture_default_str();
    infer->add_option("--angle-noise", infer_args.angle_noise, "oracle angle noise, degrees")
        ->capture_default_str();
    infer->add_option("--seed", infer_args.seed, "rng seed for angle noise")
        ->capture_default_str();
    infer->add_option("--threads", infer_args.threads, "worker threads")->capture_default_str();
    infer->set_config("--config");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "score predictions with PCK");
    eval->add_option("--pred", eval_args.pred_path, "predictions (.jsonl)")->required();
    eval->add_option("--truth", eval_args.truth_dir, "ground-truth dataset directory")->required();
    eval->add_option("--baseline", eval_args.baseline, "also score a baseline")
        ->check(CLI::IsMember({"unary-argmax"}));
    eval->set_config("--config");

    try {
        app.parse(argc, argv);
        for (CLI::App* sub : {synth, cluster, init, train, infer, eval})
            if (sub->parsed()) apply_config_file(*sub);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (cluster->parsed()) return cmd_cluster(cluster_args);
        if (init->parsed()) return cmd_init(init_args);
        if (train->parsed()) return cmd_train(train_args);
        if (infer->parsed()) return cmd_infer(infer_args);
        if (eval->parsed()) return cmd_eval(eval_args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace handgm
