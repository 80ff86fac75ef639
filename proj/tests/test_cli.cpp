#include <doctest.h>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "handgm/cli.hpp"
#include "handgm/formats.hpp"

using namespace handgm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::mt19937_64 rng(std::random_device{}());
        path = fs::temp_directory_path() / ("handgm_cli_" + std::to_string(rng()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

struct CliResult {
    int rc = 0;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("handgm");
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
    std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
    CliResult r;
    r.rc = run_cli(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// The report command emits a human table followed by one machine-readable
// JSON line; the JSON line is the last non-empty line of stdout.
nlohmann::json last_json_line(const std::string& out) {
    std::istringstream is(out);
    std::string line, last;
    while (std::getline(is, line))
        if (!line.empty()) last = line;
    return nlohmann::json::parse(last);
}

std::string read_file(const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("synth, cluster, init, infer, eval round trip on clean data") {
    TempDir tmp;
    const std::string data = tmp.sub("data");
    const std::string clusters = tmp.sub("clusters.gmkm");
    const std::string pool = tmp.sub("pool.gmpk");
    const std::string preds = tmp.sub("preds.jsonl");

    CliResult synth = run({"synth", "--out", data, "--samples", "40", "--prototypes", "2",
                           "--grid-h", "32", "--grid-w", "32", "--pose-sigma", "0.25",
                           "--rot-range", "180", "--p-drop", "0", "--p-distract", "0",
                           "--jitter-sigma", "0", "--seed", "7"});
    CAPTURE(synth.err);
    REQUIRE(synth.rc == 0);
    REQUIRE(fs::exists(fs::path(data) / "annotations.jsonl"));

    CliResult cluster = run({"cluster", "--data", data, "--clusters", "2", "--out", clusters,
                             "--seed", "3"});
    CAPTURE(cluster.err);
    REQUIRE(cluster.rc == 0);
    REQUIRE(fs::exists(clusters));

    CliResult init = run({"init", "--data", data, "--clusters", clusters, "--out", pool,
                          "--radius", "10", "--angle", "oracle", "--seed", "3"});
    CAPTURE(init.err);
    REQUIRE(init.rc == 0);
    REQUIRE(fs::exists(pool));

    CliResult infer = run({"infer", "--data", data, "--pool", pool, "--clusters", clusters,
                           "--out", preds, "--angle", "oracle", "--seed", "3"});
    CAPTURE(infer.err);
    REQUIRE(infer.rc == 0);
    REQUIRE(fs::exists(preds));

    CliResult eval = run({"eval", "--pred", preds, "--truth", data});
    CAPTURE(eval.err);
    REQUIRE(eval.rc == 0);

    // Human-readable table plus the trailing JSON record.
    CHECK(eval.out.find("sigma") != std::string::npos);
    CHECK(eval.out.find("mPCK") != std::string::npos);
    nlohmann::json rec = last_json_line(eval.out);
    CHECK(rec.at("type") == "pck_report");
    CHECK(rec.at("samples") == 40);
    REQUIRE(rec.at("thresholds").size() == 6);
    CHECK(rec.at("thresholds")[5].get<double>() == doctest::Approx(0.06));
    REQUIRE(rec.at("pck").size() == 6);
    // Clean uncorrupted inputs: nearly every keypoint lands in the widest band.
    CHECK(rec.at("pck")[5].get<double>() >= 0.95);
    CHECK(rec.at("mpck").get<double>() > 0.5);
    CHECK(rec.count("baseline") == 0);

    SUBCASE("baseline flag adds a second report column and JSON field") {
        CliResult with_base =
            run({"eval", "--pred", preds, "--truth", data, "--baseline", "unary-argmax"});
        REQUIRE(with_base.rc == 0);
        CHECK(with_base.out.find("unary-argmax") != std::string::npos);
        nlohmann::json b = last_json_line(with_base.out);
        REQUIRE(b.count("baseline") == 1);
        CHECK(b.at("baseline").at("name") == "unary-argmax");
        REQUIRE(b.at("baseline").at("pck").size() == 6);
        CHECK(b.at("baseline").at("mpck").get<double>() > 0.0);
    }

    SUBCASE("evaluation reruns produce byte-identical reports") {
        CliResult again = run({"eval", "--pred", preds, "--truth", data});
        REQUIRE(again.rc == 0);
        CHECK(again.out == eval.out);
    }

    SUBCASE("inference reruns produce byte-identical predictions") {
        const std::string preds2 = tmp.sub("preds2.jsonl");
        CliResult infer2 = run({"infer", "--data", data, "--pool", pool, "--clusters", clusters,
                                "--out", preds2, "--angle", "oracle", "--seed", "3"});
        REQUIRE(infer2.rc == 0);
        CHECK(read_file(preds2) == read_file(preds));
    }
}

TEST_CASE("synth is deterministic per seed and sensitive to it") {
    TempDir tmp;
    auto gen = [&](const std::string& name, const std::string& seed) {
        CliResult r = run({"synth", "--out", tmp.sub(name), "--samples", "6", "--grid-h", "12",
                           "--grid-w", "12", "--seed", seed});
        REQUIRE(r.rc == 0);
        return read_file(tmp.sub(name) + "/annotations.jsonl");
    };
    std::string a = gen("a", "11");
    std::string b = gen("b", "11");
    std::string c = gen("c", "12");
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("config file supplies defaults and explicit flags override it") {
    TempDir tmp;
    const std::string cfg = tmp.sub("synth.ini");
    {
        std::ofstream os(cfg);
        os << "samples=6\n";
        os << "grid-h=12\n";
        os << "grid-w=12\n";
        os << "pose-sigma=0.3\n";
        os << "seed=9\n";
    }
    const std::string out = tmp.sub("cfgdata");
    CliResult r = run({"synth", "--config", cfg, "--out", out, "--samples", "10"});
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);

    std::vector<DatasetEntry> entries = read_dataset(out);
    CHECK(entries.size() == 10);  // the flag wins over samples=6
    REQUIRE(!entries.empty());
    CHECK(entries[0].unaries.layers.at(0).height == 12);  // grid size comes from the file
    CHECK(entries[0].unaries.layers.at(0).width == 12);
}

TEST_CASE("train writes the pool and a per-epoch loss history") {
    TempDir tmp;
    const std::string data = tmp.sub("data");
    const std::string pool = tmp.sub("pool.gmpk");
    const std::string trained = tmp.sub("trained.gmpk");
    const std::string csv = tmp.sub("loss.csv");

    REQUIRE(run({"synth", "--out", data, "--samples", "10", "--grid-h", "12", "--grid-w", "12",
                 "--pose-sigma", "0.25", "--seed", "21"})
                .rc == 0);
    REQUIRE(run({"init", "--data", data, "--out", pool, "--radius", "4"}).rc == 0);

    CliResult train = run({"train", "--data", data, "--pool", pool, "--out", trained,
                           "--loss-csv", csv, "--lr", "1e-3", "--epochs", "2", "--batch", "4",
                           "--seed", "1"});
    CAPTURE(train.err);
    REQUIRE(train.rc == 0);
    CHECK(train.out.find("epoch 1") != std::string::npos);
    CHECK(train.out.find("epoch 2") != std::string::npos);
    REQUIRE(fs::exists(trained));

    std::istringstream is(read_file(csv));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "epoch,mean_loss");
    CHECK(lines[1].rfind("1,", 0) == 0);
    CHECK(lines[2].rfind("2,", 0) == 0);
}

TEST_CASE("failures exit with status 1 and an error diagnostic") {
    TempDir tmp;

    SUBCASE("missing prediction file") {
        CliResult r = run({"eval", "--pred", tmp.sub("nope.jsonl"), "--truth", tmp.sub("nope")});
        CHECK(r.rc == 1);
        CHECK(r.err.find("error:") != std::string::npos);
    }

    SUBCASE("missing dataset directory") {
        CliResult r = run({"init", "--data", tmp.sub("absent"), "--out", tmp.sub("p.gmpk")});
        CHECK(r.rc == 1);
        CHECK(r.err.find("error:") != std::string::npos);
    }

    SUBCASE("pool and cluster model counts must agree") {
        const std::string data = tmp.sub("data");
        const std::string clusters = tmp.sub("clusters.gmkm");
        const std::string pool = tmp.sub("pool.gmpk");
        REQUIRE(run({"synth", "--out", data, "--samples", "8", "--grid-h", "12", "--grid-w",
                     "12", "--seed", "4"})
                    .rc == 0);
        REQUIRE(run({"cluster", "--data", data, "--clusters", "2", "--out", clusters}).rc == 0);
        // Single-model pool (no clusters passed at init) used with a 2-way clustering.
        REQUIRE(run({"init", "--data", data, "--out", pool, "--radius", "4"}).rc == 0);
        CliResult r = run({"infer", "--data", data, "--pool", pool, "--clusters", clusters,
                           "--out", tmp.sub("p.jsonl")});
        CHECK(r.rc == 1);
        CHECK(r.err.find("error:") != std::string::npos);
    }

    SUBCASE("unknown key in a config file is rejected") {
        const std::string cfg = tmp.sub("bad.ini");
        {
            std::ofstream os(cfg);
            os << "not-an-option=3\n";
        }
        CliResult r = run({"synth", "--config", cfg, "--out", tmp.sub("d")});
        CHECK(r.rc == 1);
        CHECK(r.err.find("not-an-option") != std::string::npos);
    }

    SUBCASE("unknown subcommand is rejected") {
        CliResult r = run({"bogus"});
        CHECK(r.rc != 0);
        CHECK(!r.err.empty());
    }

    SUBCASE("unknown flag is rejected") {
        CliResult r = run({"synth", "--out", tmp.sub("d"), "--frobnicate", "3"});
        CHECK(r.rc != 0);
        CHECK(!r.err.empty());
    }
}
