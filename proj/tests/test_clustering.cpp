#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "handgm/clustering.hpp"

using namespace handgm;

namespace {

struct Fixture {
    SkeletonTree tree = build_default_hand_tree();
    MessageSchedule schedule = message_schedule(tree);
};

Pose random_pose(std::mt19937_64& rng, double spread) {
    std::uniform_real_distribution<double> u(-spread, spread);
    Pose p;
    p.pts.resize(kHandKeypointCount, {0.0, 0.0});
    for (Vec2& pt : p.pts) pt = {u(rng), u(rng)};
    return p;
}

std::vector<std::vector<double>> blob_features(std::mt19937_64& rng,
                                               const std::vector<std::vector<double>>& centers,
                                               int per_blob, double sigma,
                                               std::vector<int>* labels) {
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<std::vector<double>> features;
    for (size_t b = 0; b < centers.size(); ++b)
        for (int i = 0; i < per_blob; ++i) {
            std::vector<double> f = centers[b];
            for (double& x : f) x += noise(rng);
            features.push_back(std::move(f));
            if (labels) labels->push_back(static_cast<int>(b));
        }
    return features;
}

}  // namespace

TEST_CASE("pose features are translation-invariant and scale-covariant") {
    Fixture fx;
    std::mt19937_64 rng(7);
    Pose p = random_pose(rng, 20.0);

    std::vector<double> f = pose_feature(p, fx.tree, fx.schedule);
    REQUIRE(f.size() == 40);

    Pose shifted = p;
    for (Vec2& pt : shifted.pts) pt = pt + Vec2{5.0, -3.0};
    CHECK(pose_feature(shifted, fx.tree, fx.schedule) == f);

    Pose doubled = p;
    for (Vec2& pt : doubled.pts) pt = {31.0 + 2.0 * (pt.x - 31.0), -7.0 + 2.0 * (pt.y + 7.0)};
    std::vector<double> g = pose_feature(doubled, fx.tree, fx.schedule);
    for (size_t i = 0; i < f.size(); ++i)
        CHECK(g[i] == doctest::Approx(2.0 * f[i]).epsilon(1e-9));
}

TEST_CASE("two-node toy feature is the bone vector") {
    SkeletonTree tree(2, 0, {{0, 1}});
    MessageSchedule schedule = message_schedule(tree);
    Pose p;
    p.pts = {{0.0, 0.0}, {3.0, 4.0}};
    std::vector<double> f = pose_feature(p, tree, schedule);
    REQUIRE(f.size() == 2);
    CHECK(f[0] == 3.0);
    CHECK(f[1] == 4.0);

    // Shape feature divides by the tight box side (max extent = 4).
    std::vector<double> s = shape_feature(p, tree, schedule);
    CHECK(s[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("shape features are scale-invariant") {
    Fixture fx;
    std::mt19937_64 rng(11);
    Pose p = random_pose(rng, 15.0);
    std::vector<double> s = shape_feature(p, fx.tree, fx.schedule);
    Pose tripled = p;
    for (Vec2& pt : tripled.pts) pt = {3.0 * pt.x + 100.0, 3.0 * pt.y - 40.0};
    std::vector<double> t = shape_feature(tripled, fx.tree, fx.schedule);
    for (size_t i = 0; i < s.size(); ++i) CHECK(t[i] == doctest::Approx(s[i]).epsilon(1e-9));

    Pose collapsed;
    collapsed.pts.assign(kHandKeypointCount, {2.0, 2.0});
    CHECK_THROWS_AS(shape_feature(collapsed, fx.tree, fx.schedule), std::domain_error);
}

TEST_CASE("kmeans with as many clusters as points zeroes the distortion") {
    std::vector<std::vector<double>> features{{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
    KmeansResult r = kmeans_fit(features, 3, 0);
    REQUIRE(r.model.cluster_count() == 3);
    CHECK(r.distortion_history.back() == 0.0);
    // All three points are covered by exactly one centroid each.
    std::vector<int> seen(3, 0);
    for (size_t i = 0; i < features.size(); ++i) seen[static_cast<size_t>(r.assignments[i])]++;
    CHECK(seen == std::vector<int>{1, 1, 1});
}

TEST_CASE("kmeans separates well-spaced blobs") {
    std::mt19937_64 rng(13);
    std::vector<std::vector<double>> centers{
        {0.0, 0.0, 0.0}, {10.0, 0.0, 0.0}, {0.0, 10.0, 0.0}, {0.0, 0.0, 10.0}};
    std::vector<int> labels;
    auto features = blob_features(rng, centers, 50, 1.0, &labels);

    KmeansResult r = kmeans_fit(features, 4, 99);

    // Majority-label purity over the produced clusters.
    std::map<std::pair<int, int>, int> joint;
    for (size_t i = 0; i < features.size(); ++i) joint[{r.assignments[i], labels[i]}]++;
    int agree = 0;
    for (int c = 0; c < 4; ++c) {
        int best = 0;
        for (int l = 0; l < 4; ++l) {
            auto it = joint.find({c, l});
            if (it != joint.end()) best = std::max(best, it->second);
        }
        agree += best;
    }
    CHECK(static_cast<double>(agree) / static_cast<double>(features.size()) >= 0.95);
    CHECK(r.model.tau > 0.0);
}

TEST_CASE("distortion history never increases") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> features;
    for (int i = 0; i < 120; ++i) features.push_back({u(rng), u(rng), u(rng), u(rng)});
    KmeansResult r = kmeans_fit(features, 5, 3);
    REQUIRE(!r.distortion_history.empty());
    for (size_t i = 1; i < r.distortion_history.size(); ++i)
        CHECK(r.distortion_history[i] <= r.distortion_history[i - 1] + 1e-12);
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<std::vector<double>> features;
    for (int i = 0; i < 60; ++i) features.push_back({u(rng), u(rng)});
    KmeansResult a = kmeans_fit(features, 3, 42);
    KmeansResult b = kmeans_fit(features, 3, 42);
    CHECK(a.assignments == b.assignments);
    CHECK(a.model.centroids == b.model.centroids);
    CHECK(a.model.tau == b.model.tau);

    KmeansResult c = kmeans_fit(features, 3, 43);
    CHECK(c.model.cluster_count() == 3);  // different seed still fits
}

TEST_CASE("kmeans rejects too few distinct features") {
    std::vector<std::vector<double>> features{{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}, {3.0, 4.0}};
    CHECK_THROWS_AS(kmeans_fit(features, 3, 0), std::invalid_argument);
    CHECK_NOTHROW(kmeans_fit(features, 2, 0));
}

TEST_CASE("soft assignment reproduces the softmax of squared distances") {
    ClusterModel model;
    model.centroids = {{0.0, 0.0}, {2.0, 0.0}};
    model.tau = 1.0;

    SUBCASE("worked example: squared distances 1 and 2") {
        // f = (1, 0): squared distance 1 to the first centroid, 2 to the second.
        std::vector<double> f{1.0, 0.0};
        model.centroids = {{0.0, 0.0}, {1.0, std::sqrt(2.0)}};
        MixtureWeights w = soft_assign(model, f);
        double z = std::exp(-1.0) + std::exp(-2.0);
        CHECK(w.w[0] == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-12));
        CHECK(w.w[1] == doctest::Approx(std::exp(-2.0) / z).epsilon(1e-12));
        CHECK(w.w[0] == doctest::Approx(0.7311).epsilon(1e-4));
        CHECK(w.w[1] == doctest::Approx(0.2689).epsilon(1e-4));
        CHECK_NOTHROW(w.validate());
    }

    SUBCASE("equidistant feature splits evenly") {
        std::vector<double> f{1.0, 5.0};
        MixtureWeights w = soft_assign(model, f);
        CHECK(w.w[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(w.w[1] == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("small temperature approaches the hard assignment") {
        std::vector<double> f{0.4, -0.2};
        model.tau = 1e-6;
        MixtureWeights w = soft_assign(model, f);
        int hard = hard_assign(model, f);
        CHECK(hard == 0);
        CHECK(w.w[static_cast<size_t>(hard)] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK_NOTHROW(w.validate());
    }

    SUBCASE("argmax of soft equals hard for any temperature") {
        std::mt19937_64 rng(29);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (double tau : {0.01, 0.7, 5.0, 300.0}) {
            model.tau = tau;
            for (int trial = 0; trial < 25; ++trial) {
                std::vector<double> f{u(rng), u(rng)};
                MixtureWeights w = soft_assign(model, f);
                int argmax = static_cast<int>(
                    std::max_element(w.w.begin(), w.w.end()) - w.w.begin());
                CHECK(argmax == hard_assign(model, f));
                CHECK_NOTHROW(w.validate());
            }
        }
    }
}

TEST_CASE("cluster files round trip") {
    ClusterModel model;
    model.centroids = {{0.25f, -1.5f, 3.0f}, {2.0f, 0.125f, -0.75f}};
    model.tau = 0.5;

    auto path = std::filesystem::temp_directory_path() / "clusters_roundtrip.gmkm";
    save_clusters(path.string(), model);
    ClusterModel back = load_clusters(path.string());
    CHECK(back.tau == doctest::Approx(model.tau).epsilon(1e-7));
    REQUIRE(back.cluster_count() == 2);
    REQUIRE(back.dim() == 3);
    for (size_t c = 0; c < 2; ++c)
        for (size_t d = 0; d < 3; ++d)
            CHECK(back.centroids[c][d] == model.centroids[c][d]);

    SUBCASE("corrupt magic is reported") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("ZZZZ", 4);
        f.close();
        CHECK_THROWS_WITH_AS(load_clusters(path.string()), doctest::Contains("magic"),
                             std::runtime_error);
    }
    SUBCASE("truncation is reported") {
        std::filesystem::resize_file(path, 20);
        CHECK_THROWS_AS(load_clusters(path.string()), std::runtime_error);
    }
    std::filesystem::remove(path);
}
