#include "handgm/formats.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "binio.hpp"

namespace handgm {

namespace {

using nlohmann::json;

json annotation_to_json(const Annotation& a) {
    json rec;
    rec["sample_id"] = a.sample_id;
    rec["box"] = {{"cx", a.box.center.x}, {"cy", a.box.center.y}, {"side", a.box.side}};
    json kps = json::array();
    for (const Vec2& p : a.keypoints.pts) kps.push_back({p.x, p.y});
    rec["keypoints"] = std::move(kps);
    if (a.cluster_id >= 0) rec["cluster_id"] = a.cluster_id;
    if (a.prototype_id >= 0) rec["prototype_id"] = a.prototype_id;
    return rec;
}

Annotation annotation_from_json(const json& rec, const std::string& where) {
    Annotation a;
    try {
        a.sample_id = rec.at("sample_id").get<std::string>();
        const json& box = rec.at("box");
        a.box.center.x = box.at("cx").get<double>();
        a.box.center.y = box.at("cy").get<double>();
        a.box.side = box.at("side").get<double>();
        for (const json& kp : rec.at("keypoints")) {
            if (!kp.is_array() || kp.size() != 2)
                throw std::runtime_error("keypoint entry is not an [x, y] pair");
            a.keypoints.pts.push_back({kp[0].get<double>(), kp[1].get<double>()});
        }
        if (rec.contains("cluster_id")) a.cluster_id = rec.at("cluster_id").get<int>();
        if (rec.contains("prototype_id")) a.prototype_id = rec.at("prototype_id").get<int>();
    } catch (const json::exception& e) {
        throw std::runtime_error(where + ": " + e.what());
    }
    if (!(a.box.side > 0.0)) throw std::runtime_error(where + ": non-positive box side");
    for (const Vec2& p : a.keypoints.pts)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw std::runtime_error(where + ": non-finite keypoint");
    return a;
}

}  // namespace

void write_annotations(const std::string& path, std::span<const Annotation> records) {
    binio::write_atomic(path, [&](std::ostream& os) {
        for (const Annotation& a : records) os << annotation_to_json(a).dump() << '\n';
    });
}

std::vector<Annotation> read_annotations(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error(path + ": cannot open");
    std::vector<Annotation> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::string where = path + ":" + std::to_string(lineno);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(where + ": " + e.what());
        }
        out.push_back(annotation_from_json(rec, where));
    }
    if (out.empty()) throw std::runtime_error(path + ": no annotation records");
    return out;
}

namespace {

constexpr char kHeatmapMagic[4] = {'G', 'M', 'H', 'M'};
constexpr uint32_t kHeatmapVersion = 1;

}  // namespace

void write_heatmaps(const std::string& path, const ConfidenceStack& stack) {
    if (stack.layers.empty()) throw std::invalid_argument("cannot write an empty stack");
    stack.validate_shapes();
    binio::write_atomic(path, [&](std::ostream& os) {
        os.write(kHeatmapMagic, 4);
        binio::put_u32(os, kHeatmapVersion);
        binio::put_u32(os, static_cast<uint32_t>(stack.layers.size()));
        binio::put_u32(os, static_cast<uint32_t>(stack.layers.front().height));
        binio::put_u32(os, static_cast<uint32_t>(stack.layers.front().width));
        for (const Grid2D& layer : stack.layers)
            for (double x : layer.v) binio::put_f32(os, static_cast<float>(x));
    });
}

ConfidenceStack read_heatmaps(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kHeatmapMagic, 4))
        throw std::runtime_error(path + ": bad magic at byte 0, expected GMHM");
    uint32_t version = binio::get_u32(is, path, "version");
    if (version != kHeatmapVersion)
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    uint32_t k = binio::get_u32(is, path, "layer count");
    uint32_t h = binio::get_u32(is, path, "height");
    uint32_t w = binio::get_u32(is, path, "width");
    if (k == 0 || k > 4096) throw std::runtime_error(path + ": implausible layer count");
    if (h == 0 || w == 0 || h > 1u << 16 || w > 1u << 16)
        throw std::runtime_error(path + ": implausible dimensions");

    ConfidenceStack stack;
    stack.frame = Frame::original;
    stack.layers.assign(k, Grid2D(static_cast<int>(h), static_cast<int>(w)));
    for (Grid2D& layer : stack.layers)
        for (double& x : layer.v) {
            long long offset = static_cast<long long>(is.tellg());
            x = binio::get_f32(is, path, "heatmap value");
            if (!std::isfinite(x))
                throw std::runtime_error(path + ": non-finite heatmap value at byte " +
                                         std::to_string(offset));
        }
    char extra;
    if (is.read(&extra, 1)) throw std::runtime_error(path + ": trailing bytes after heatmap data");
    return stack;
}

void write_dataset(const std::string& dir, std::span<const Sample> samples) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<Annotation> records;
    records.reserve(samples.size());
    for (const Sample& s : samples) {
        Annotation a;
        a.sample_id = s.id;
        a.box = s.box;
        a.keypoints = s.truth;
        a.prototype_id = s.prototype_id;
        records.push_back(std::move(a));
        write_heatmaps((fs::path(dir) / (s.id + ".gmhm")).string(), s.unaries);
    }
    write_annotations((fs::path(dir) / "annotations.jsonl").string(), records);
}

std::vector<DatasetEntry> read_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<Annotation> records = read_annotations((fs::path(dir) / "annotations.jsonl").string());
    std::vector<DatasetEntry> out;
    out.reserve(records.size());
    for (Annotation& a : records) {
        DatasetEntry entry;
        entry.unaries = read_heatmaps((fs::path(dir) / (a.sample_id + ".gmhm")).string());
        entry.annotation = std::move(a);
        out.push_back(std::move(entry));
    }
    return out;
}

Sample to_sample(const DatasetEntry& entry) {
    Sample s;
    s.id = entry.annotation.sample_id;
    s.truth = entry.annotation.keypoints;
    s.box = entry.annotation.box;
    s.unaries = entry.unaries;
    s.prototype_id = entry.annotation.prototype_id;
    return s;
}

}  // namespace handgm
