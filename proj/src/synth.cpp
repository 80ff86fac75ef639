#include "handgm/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "handgm/skeleton.hpp"

namespace handgm {

void SynthConfig::validate() const {
    if (sample_count < 1) throw std::invalid_argument("sample count must be >= 1");
    if (prototype_count < 1 || prototype_count > prototype_count_available())
        throw std::invalid_argument("prototype count must be in [1, " +
                                    std::to_string(prototype_count_available()) + "]");
    if (grid_h < 2 || grid_w < 2) throw std::invalid_argument("grid must be at least 2x2");
    if (!(pose_sigma >= 0.0)) throw std::invalid_argument("pose sigma must be >= 0");
    if (!(rotation_range_deg >= 0.0)) throw std::invalid_argument("rotation range must be >= 0");
    if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw std::invalid_argument("p_drop must be in [0, 1]");
    if (!(p_distract >= 0.0 && p_distract <= 1.0))
        throw std::invalid_argument("p_distract must be in [0, 1]");
    if (!(jitter_sigma >= 0.0)) throw std::invalid_argument("jitter sigma must be >= 0");
    if (!(unary_sigma > 0.0)) throw std::invalid_argument("unary sigma must be positive");
}

namespace {

constexpr double kHandScale = 100.0;  // pixels, wrist to middle-finger base
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

// Direction for an angle measured from image-up, positive toward +x.
Vec2 heading(double deg) { return {std::sin(deg * kDegToRad), -std::cos(deg * kDegToRad)}; }

struct FingerSpec {
    Vec2 base;       // fraction of kHandScale
    double dir_deg;  // base direction from image-up
    double seg[3];   // segment lengths, fraction of kHandScale
};

constexpr FingerSpec kFingers[5] = {
    {{-0.55, -0.30}, -70.0, {0.30, 0.25, 0.20}},  // thumb
    {{-0.30, -0.95}, -12.0, {0.35, 0.22, 0.18}},  // index
    {{0.00, -1.00}, 0.0, {0.38, 0.25, 0.20}},     // middle
    {{0.28, -0.95}, 12.0, {0.35, 0.22, 0.18}},    // ring
    {{0.55, -0.85}, 25.0, {0.28, 0.18, 0.15}},    // pinky
};

// Per-joint bend in degrees, one row per prototype, one column per finger.
constexpr double kBends[4][5] = {
    {8.0, 5.0, 5.0, 5.0, 5.0},       // open palm
    {45.0, 75.0, 75.0, 75.0, 75.0},  // fist
    {30.0, 5.0, 75.0, 75.0, 75.0},   // point
    {35.0, 50.0, 40.0, 40.0, 40.0},  // pinch
};

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Keypoint on the neighboring finger at the same chain position; -1 for the
// wrist.
int mirror_keypoint(int k) {
    if (k == 0) return -1;
    int finger = (k - 1) / 4;
    int joint = (k - 1) % 4;
    int other = finger < 4 ? finger + 1 : finger - 1;
    return 1 + 4 * other + joint;
}

void add_gaussian(Grid2D& layer, Vec2 center, double sigma, double amp) {
    for (int m = 0; m < layer.height; ++m)
        for (int n = 0; n < layer.width; ++n) {
            double dy = m - center.y;
            double dx = n - center.x;
            layer.at(m, n) += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
}

}  // namespace

int prototype_count_available() { return 4; }

Pose prototype_pose(int which) {
    if (which < 0 || which >= prototype_count_available())
        throw std::invalid_argument("prototype index out of range");
    Pose pose;
    pose.pts.assign(kHandKeypointCount, Vec2{});
    pose.pts[0] = {0.0, 0.0};
    for (int f = 0; f < 5; ++f) {
        const FingerSpec& spec = kFingers[f];
        Vec2 p = spec.base * kHandScale;
        pose.pts[static_cast<size_t>(1 + 4 * f)] = p;
        double dir = spec.dir_deg;
        for (int j = 0; j < 3; ++j) {
            dir += kBends[which][f];
            p = p + heading(dir) * (spec.seg[j] * kHandScale);
            pose.pts[static_cast<size_t>(2 + 4 * f + j)] = p;
        }
    }
    return pose;
}

std::vector<Sample> generate_dataset(const SynthConfig& cfg) {
    cfg.validate();
    // Pixel size of one grid cell for the nominal (unjittered) hand, so the
    // jitter magnitudes given in cells translate to pixels.
    double nominal_extent = tight_pose_box(prototype_pose(0)).side;
    double nominal_cell = 2.2 * nominal_extent / cfg.grid_w;

    std::vector<Sample> samples;
    samples.reserve(static_cast<size_t>(cfg.sample_count));
    for (int i = 0; i < cfg.sample_count; ++i) {
        std::mt19937_64 rng(splitmix64(cfg.seed + 0x9e3779b97f4a7c15ULL * (static_cast<uint64_t>(i) + 1)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);

        Sample s;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%05d", i);
        s.id = buf;
        s.prototype_id = static_cast<int>(rng() % static_cast<uint64_t>(cfg.prototype_count));
        s.truth = prototype_pose(s.prototype_id);
        if (cfg.pose_sigma > 0.0)
            for (Vec2& p : s.truth.pts) {
                p.x += gauss(rng) * cfg.pose_sigma * nominal_cell;
                p.y += gauss(rng) * cfg.pose_sigma * nominal_cell;
            }
        double beta = (2.0 * unit(rng) - 1.0) * cfg.rotation_range_deg;
        s.truth = rotate_points(s.truth, beta, pose_centroid(s.truth));
        Vec2 shift{(2.0 * unit(rng) - 1.0) * 0.25 * nominal_extent,
                   (2.0 * unit(rng) - 1.0) * 0.25 * nominal_extent};
        for (Vec2& p : s.truth.pts) p = p + shift;

        BoundingBox tight = tight_pose_box(s.truth);
        s.box.center = tight.center;
        s.box.side = 2.2 * tight.side;

        Pose g = box_to_grid(s.truth, s.box, cfg.grid_w, cfg.grid_h);
        s.unaries.frame = Frame::original;
        s.unaries.layers.assign(static_cast<size_t>(kHandKeypointCount),
                                Grid2D(cfg.grid_h, cfg.grid_w));
        for (int k = 0; k < kHandKeypointCount; ++k) {
            Grid2D& layer = s.unaries.layers[static_cast<size_t>(k)];
            if (unit(rng) < cfg.p_drop) {
                for (double& x : layer.v) x = 0.05 + 0.10 * unit(rng);
                Vec2 center{unit(rng) * cfg.grid_w - 0.5, unit(rng) * cfg.grid_h - 0.5};
                add_gaussian(layer, center, cfg.unary_sigma, 0.6 + 0.4 * unit(rng));
            } else {
                Vec2 center = g[k];
                if (cfg.jitter_sigma > 0.0) {
                    center.x += gauss(rng) * cfg.jitter_sigma;
                    center.y += gauss(rng) * cfg.jitter_sigma;
                }
                add_gaussian(layer, center, cfg.unary_sigma, 1.0);
                int mk = mirror_keypoint(k);
                if (mk >= 0 && unit(rng) < cfg.p_distract)
                    add_gaussian(layer, g[mk], cfg.unary_sigma, 0.7 + 0.6 * unit(rng));
            }
            normalize_in_place(layer);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

Pose grid_truth(const Sample& s) {
    if (s.unaries.layers.empty()) throw std::invalid_argument("sample has no unary layers");
    return box_to_grid(s.truth, s.box, s.unaries.layers.front().width,
                       s.unaries.layers.front().height);
}

AngleProvider make_zero_angle_provider() {
    return [](const Sample&) { return 0.0; };
}

AngleProvider make_oracle_angle_provider(double noise_sigma_deg, uint64_t seed) {
    if (noise_sigma_deg < 0.0) throw std::invalid_argument("angle noise sigma must be >= 0");
    return [noise_sigma_deg, seed](const Sample& s) {
        double angle = canonical_angle(s.truth);
        if (noise_sigma_deg > 0.0) {
            std::mt19937_64 rng(splitmix64(seed ^ fnv1a(s.id)));
            std::normal_distribution<double> gauss(0.0, noise_sigma_deg);
            angle += gauss(rng);
        }
        return wrap_degrees(angle);
    };
}

}  // namespace handgm
