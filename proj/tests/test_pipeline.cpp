#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "deepagent/binary_io.hpp"
#include "deepagent/pipeline/config.hpp"
#include "deepagent/pipeline/feature_cache.hpp"
#include "deepagent/pipeline/fixtures.hpp"
#include "deepagent/pipeline/manifest.hpp"
#include "deepagent/pipeline/workflow.hpp"
#include "deepagent/rng.hpp"
#include "deepagent/text/similarity.hpp"
#include "deepagent/vision/frame.hpp"

using namespace deepagent;
using namespace deepagent::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("deepagent_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void touch(const fs::path& p, const std::string& text = "x") { io::write_text(p, text); }

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

struct Run {
  int code = -1;
  std::string out, err;
};

Run run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string(DEEPAGENT_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_text(out);
  r.err = io::read_text(err);
  return r;
}

std::map<std::string, io::Bytes> tree_bytes(const fs::path& root) {
  std::map<std::string, io::Bytes> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
  return out;
}

// Mean absolute step across 4-pixel block borders over the mean step inside blocks.
double blockiness(const vision::Frame& f) {
  double border = 0, inside = 0;
  int nb = 0, ni = 0;
  for (int y = 0; y < f.height; ++y)
    for (int x = 1; x < f.width; ++x) {
      const double d = std::abs(f.at(x, y, 0) - f.at(x - 1, y, 0));
      if (x % 4 == 0) {
        border += d;
        ++nb;
      } else {
        inside += d;
        ++ni;
      }
    }
  return (border / nb) / std::max(inside / ni, 1e-9);
}

}  // namespace

TEST_CASE("pipeline config") {
  PipelineConfig d;
  CHECK(d.seed == 42);
  CHECK(d.splits.train + d.splits.val + d.splits.test == doctest::Approx(1.0));
  CHECK(d.m == 30);
  CHECK(d.meta_dims == 2);
  CHECK(d.frame_policy == FramePolicy::Interval5);
  CHECK(d.fusion_samples == FusionSamples::HeldOut);
  CHECK(d.agent1.adam.learning_rate == 1e-4);
  CHECK(d.agent1.epochs == 50);
  CHECK(d.agent2.epochs == 100);
  CHECK(d.fusion.folds == 5);
  CHECK(d.fusion.forest.trees == 100);

  const auto c = config_from_json(json::parse(
      R"({"seed": 7, "desk_scale": true, "frame_policy": "even", "m": 12, "agent1": {"epochs": 3}, "forest": {"trees": 9}})"));
  CHECK(c.seed == 7);
  CHECK(c.agent1.seed == 7);
  CHECK(c.fusion.seed == 7);
  CHECK(c.agent1.arch.input_size == 64);
  CHECK(c.frame_policy == FramePolicy::Even);
  CHECK(c.agent1.epochs == 3);
  CHECK(c.fusion.forest.trees == 9);
  CHECK(config_from_json(to_json(c)).seed == 7);
  CHECK(to_json(config_from_json(to_json(c))) == to_json(c));

  CHECK_THROWS_AS(config_from_json(json::parse(R"({"seeds": 1})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"agent2": {"epoch": 1}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"m": "ten"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"seed": -1})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"meta_dims": 3})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"splits": {"train": 0.7, "val": 0.2, "test": 0.2}})")), ConfigError);
  CHECK_NOTHROW(config_from_json(json::parse(R"({"splits": {"train": 0.5, "val": 0.25, "test": 0.25}})")));

  SUBCASE("file resolution: explicit path, then the environment, then defaults") {
    TempDir dir("config");
    io::write_text(dir.path / "a.json", R"({"seed": 5})");
    io::write_text(dir.path / "b.json", R"({"seed": 6})");
    ::unsetenv(kConfigEnv);
    CHECK(load_config(std::nullopt).seed == 42);
    ::setenv(kConfigEnv, (dir.path / "b.json").c_str(), 1);
    CHECK(load_config(std::nullopt).seed == 6);
    CHECK(load_config(dir.path / "a.json").seed == 5);
    ::unsetenv(kConfigEnv);
    CHECK_THROWS_AS(load_config(dir.path / "missing.json"), ConfigError);
    io::write_text(dir.path / "bad.json", "{");
    CHECK_THROWS_AS(load_config(dir.path / "bad.json"), ConfigError);
  }
}

TEST_CASE("manifest loading") {
  TempDir dir("manifest");
  touch(dir.path / "a0.ppm");
  touch(dir.path / "a1.ppm");
  touch(dir.path / "b.wav");
  touch(dir.path / "b.asr.txt");
  auto write = [&](const std::string& text) {
    io::write_text(dir.path / "m.json", text);
    return dir.path / "m.json";
  };

  SUBCASE("two valid records") {
    const auto recs = load_manifest(
        write(R"([{"id": "a", "label": 0, "frames": ["a0.ppm", "a1.ppm"]}, {"id": "b", "label": "fake", "audio": "b.wav"}])"));
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].frames.size() == 2);
    CHECK(recs[0].frames[0] == fs::absolute(dir.path / "a0.ppm").lexically_normal());
    CHECK(recs[1].label == 1);
    CHECK(recs[1].audio.has_value());
    // b.asr.txt sits next to the manifest and is picked up by name.
    CHECK(recs[1].asr_text.has_value());
    CHECK_FALSE(recs[1].ocr_text.has_value());
    CHECK(recs[0].split == Split::Unassigned);
  }
  SUBCASE("duplicate id names the id") {
    const auto msg = error_of([&] {
      load_manifest(write(R"([{"id": "dup", "label": 0, "frames": ["a0.ppm"]}, {"id": "dup", "label": 1, "frames": ["a1.ppm"]}])"));
    });
    CHECK(msg.find("duplicate id \"dup\"") != std::string::npos);
  }
  SUBCASE("dangling frame path names the path") {
    const auto msg = error_of([&] { load_manifest(write(R"([{"id": "a", "label": 0, "frames": ["nope.ppm"]}])")); });
    CHECK(msg.find("nope.ppm") != std::string::npos);
    CHECK_THROWS_AS(load_manifest(dir.path / "m.json"), IngestionError);
  }
  SUBCASE("every violation is listed") {
    const auto msg = error_of([&] {
      load_manifest(write(
          R"([{"id": "a", "label": 2, "frames": ["a0.ppm"]}, {"id": "c", "label": 0}, {"label": 1, "frames": ["gone.ppm"]}, {"id": "d", "label": 0, "frames": [], "audio": "b.wav", "extra": 1}])"));
    });
    CHECK(msg.find("5 manifest violation") != std::string::npos);
    CHECK(msg.find("bad label 2") != std::string::npos);
    CHECK(msg.find("neither frames nor audio") != std::string::npos);
    CHECK(msg.find("missing or empty id") != std::string::npos);
    CHECK(msg.find("gone.ppm") != std::string::npos);
    CHECK(msg.find("unknown key \"extra\"") != std::string::npos);
  }
  SUBCASE("malformed json and non-arrays") {
    CHECK_THROWS_AS(load_manifest(write("{")), IngestionError);
    CHECK_THROWS_AS(load_manifest(write("{}")), IngestionError);
    CHECK_THROWS_AS(load_manifest(dir.path / "absent.json"), IngestionError);
  }
  SUBCASE("write then load round-trips with relative paths") {
    auto recs = load_manifest(write(R"([{"id": "a", "label": 0, "frames": ["a0.ppm"], "split": "val"}])"));
    write_manifest(dir.path / "copy.json", recs);
    const auto j = json::parse(io::read_text(dir.path / "copy.json"));
    CHECK(j[0]["frames"][0] == "a0.ppm");
    const auto again = load_manifest(dir.path / "copy.json");
    CHECK(again[0].frames == recs[0].frames);
    CHECK(again[0].split == Split::Val);
  }
}

TEST_CASE("assign_splits") {
  auto make = [](int real, int fake) {
    std::vector<SampleRecord> r;
    for (int i = 0; i < real + fake; ++i) r.push_back({"s" + std::to_string(i), i < real ? 0 : 1, {}, {}, {}, {}, {}});
    return r;
  };
  auto count = [](const std::vector<SampleRecord>& r, int label, Split s) {
    int n = 0;
    for (const auto& x : r) n += x.label == label && x.split == s;
    return n;
  };

  auto hundred = make(50, 50);
  assign_splits(hundred, {}, 42);
  for (int c = 0; c < 2; ++c) {
    CHECK(count(hundred, c, Split::Train) == 35);
    CHECK(count(hundred, c, Split::Val) == 10);
    CHECK(count(hundred, c, Split::Test) == 5);
  }
  auto again = make(50, 50);
  assign_splits(again, {}, 42);
  for (std::size_t i = 0; i < hundred.size(); ++i) CHECK(again[i].split == hundred[i].split);

  auto twenty = make(10, 10);
  assign_splits(twenty, {}, 42);
  for (int c = 0; c < 2; ++c) {
    CHECK(count(twenty, c, Split::Train) == 7);
    CHECK(count(twenty, c, Split::Val) == 2);
    CHECK(count(twenty, c, Split::Test) == 1);
  }

  auto small = make(2, 10);
  CHECK_THROWS_AS(assign_splits(small, {}, 42), UsageError);

  // Rounding error per split is below one sample and the remainder goes to train.
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int real = 3 + static_cast<int>(rng.below(120)), fake = 3 + static_cast<int>(rng.below(120));
    auto r = make(real, fake);
    assign_splits(r, {}, rng.next_u64());
    for (int c = 0; c < 2; ++c) {
      const double n = c == 0 ? real : fake;
      CHECK(std::abs(count(r, c, Split::Val) - 0.2 * n) < 1.0);
      CHECK(std::abs(count(r, c, Split::Test) - 0.1 * n) < 1.0);
      CHECK(count(r, c, Split::Train) >= 0.7 * n - 1e-9);
      CHECK(count(r, c, Split::Train) + count(r, c, Split::Val) + count(r, c, Split::Test) == static_cast<int>(n));
    }
  }
}

TEST_CASE("feature cache") {
  Rng rng(11);
  FeatureCache cache;
  Eigen::VectorXd odd(6);
  odd << 0.1, -0.0, std::numeric_limits<double>::denorm_min(), std::numeric_limits<double>::max(), -1e-300,
      std::numeric_limits<double>::quiet_NaN();
  cache.put("x/odd", odd);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd v(14);
    for (int k = 0; k < 14; ++k) v[k] = rng.uniform(-100, 100);
    cache.put("x/s" + std::to_string(i), v);
  }
  cache.put("half/a", Eigen::Vector3d(0.1, 1.5, -2.25), DType::F32);
  CHECK(cache.get("half/a")[0] == static_cast<double>(0.1f));

  const io::Bytes bytes = cache.encode();
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DAFT");
  const FeatureCache back = FeatureCache::decode(bytes, "mem");
  CHECK(back == cache);
  CHECK(back.encode() == bytes);
  CHECK(std::memcmp(back.get("x/odd").data(), odd.data(), sizeof(double) * 6) == 0);
  CHECK(back.entry("half/a").dtype == DType::F32);
  CHECK_THROWS_AS(back.get("x/none"), IngestionError);

  TempDir dir("cache");
  cache.save(dir.path / "c.daft");
  CHECK(io::read_file(dir.path / "c.daft") == bytes);
  CHECK(FeatureCache::load(dir.path / "c.daft") == cache);

  SUBCASE("corrupt containers are ingestion errors") {
    io::Bytes bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(FeatureCache::decode(bad, "m"), IngestionError);
    io::Bytes version = bytes;
    version[4] = 9;
    CHECK_THROWS_AS(FeatureCache::decode(version, "m"), IngestionError);
    io::Bytes cut(bytes.begin(), bytes.end() - 3);
    CHECK_THROWS_AS(FeatureCache::decode(cut, "m"), IngestionError);
    io::Bytes longer = bytes;
    longer.push_back(0);
    CHECK_THROWS_AS(FeatureCache::decode(longer, "m"), IngestionError);
    // dtype field of the first entry: magic, version, count, key length, key
    io::Bytes dtype = bytes;
    const std::size_t key_len = static_cast<std::size_t>(dtype[12]);
    dtype[16 + key_len] = 7;
    CHECK_THROWS_AS(FeatureCache::decode(dtype, "m"), IngestionError);
  }
}

TEST_CASE("gen_fixtures") {
  TempDir dir("fixtures");
  FixtureOptions o;
  o.samples = 8;
  o.frames_per_video = 3;
  o.frame_size = 32;

  const fs::path m1 = gen_fixtures(dir.path / "a", o);
  gen_fixtures(dir.path / "b", o);
  const auto ta = tree_bytes(dir.path / "a"), tb = tree_bytes(dir.path / "b");
  CHECK(ta.size() == 8 * (3 + 1 + 2) + 1);
  CHECK(ta == tb);

  const auto recs = load_manifest(m1);
  REQUIRE(recs.size() == 8);
  int fakes = 0;
  for (const auto& r : recs) {
    fakes += r.label;
    const auto a = text::load_tokens(r.asr_text, text::TokenSource::Asr);
    const auto v = text::load_tokens(r.ocr_text, text::TokenSource::Ocr);
    REQUIRE(a.has_value());
    REQUIRE(v.has_value());
    const double s = text::lexical_similarity(*a, *v);
    if (r.label == 0) {
      CHECK(s >= 0.75);
    } else {
      CHECK(s == 0.0);
    }
    CHECK(blockiness(vision::load_frame(r.frames[0])) > (r.label == 1 ? 2.0 : 0.0));
    if (r.label == 0) CHECK(blockiness(vision::load_frame(r.frames[0])) < 1.5);
  }
  CHECK(fakes == 4);

  SUBCASE("strength 0 and gap 0 leave the classes alike") {
    FixtureOptions flat = o;
    flat.strength = 0.0;
    flat.gap = 0.0;
    const auto same = load_manifest(gen_fixtures(dir.path / "flat", flat));
    for (const auto& r : same) {
      const auto a = text::load_tokens(r.asr_text, text::TokenSource::Asr);
      const auto v = text::load_tokens(r.ocr_text, text::TokenSource::Ocr);
      CHECK(text::lexical_similarity(*a, *v) >= 0.75);
      CHECK(blockiness(vision::load_frame(r.frames[0])) < 1.5);
    }
    // Real samples do not depend on the fake-only knobs.
    for (const auto& r : same)
      if (r.label == 0)
        for (const auto& f : r.frames)
          CHECK(io::read_file(f) == io::read_file(dir.path / "a" / f.lexically_relative(dir.path / "flat")));
  }
  SUBCASE("invalid options and unwritable targets") {
    FixtureOptions bad = o;
    bad.samples = 7;
    CHECK_THROWS_AS(gen_fixtures(dir.path / "x", bad), UsageError);
    bad = o;
    bad.strength = 1.5;
    CHECK_THROWS_AS(gen_fixtures(dir.path / "x", bad), UsageError);
    touch(dir.path / "file");
    CHECK_THROWS_AS(gen_fixtures(dir.path / "file" / "sub", o), IngestionError);
  }
}

TEST_CASE("report rendering") {
  fusion::CrossValidationReport r;
  for (int k = 1; k <= 5; ++k) {
    fusion::FoldResult f;
    f.fold = k;
    f.accuracy = 0.8 + 0.01 * k;
    f.precision = 0.75;
    f.recall = 2.0 / 3.0;
    f.f1 = 0.12345;
    f.auc = 1.0;
    r.folds.push_back(f);
  }
  r.mean.fold = -1;
  r.mean.accuracy = 0.83;
  const std::string table = render_fold_table(r);
  std::istringstream lines(table);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0] == "| Fold | Accuracy (%) | Precision (%) | Recall (%) | F1 Score (%) | AUC (%) |");
  CHECK(rows[2] == "| 1 | 81.00 | 75.00 | 66.67 | 12.35 | 100.00 |");
  CHECK(rows[7].rfind("| Mean | 83.00 |", 0) == 0);

  metrics::RocCurve roc{{{0, 0, std::numeric_limits<double>::infinity()}, {0.5, 1, 0.25}, {1, 1, -std::numeric_limits<double>::infinity()}}, 0.75};
  CHECK(render_roc_csv(roc) == "fpr,tpr,threshold\n0,0,inf\n0.5,1,0.25\n1,1,-inf\n");
}

TEST_CASE("command line workflow") {
  TempDir dir("cli");
  const fs::path scratch = dir.path;
  const std::string fx = (dir.path / "fx").string(), work = (dir.path / "work").string();
  io::write_text(dir.path / "cfg.json",
                 R"({"agent1": {"epochs": 2, "width_divisor": 16}, "agent2": {"epochs": 8}, "forest": {"trees": 15}})");
  const std::string cfg = " --config " + (dir.path / "cfg.json").string() + " --desk-scale";

  Run r = run_cli("gen-fixtures --out " + fx + " --samples 40 --frames 5 --frame-size 32", scratch);
  REQUIRE(r.code == 0);

  SUBCASE("commands out of order name the missing artifact") {
    r = run_cli("train agent1 --out " + work + cfg, scratch);
    CHECK(r.code == 1);
    CHECK(r.err.find("missing artifact") != std::string::npos);
    CHECK(r.err.find("samples.json") != std::string::npos);

    REQUIRE(run_cli("extract --manifest " + fx + "/manifest.json --out " + work + cfg, scratch).code == 0);
    r = run_cli("fuse --out " + work + cfg, scratch);
    CHECK(r.code == 1);
    const json err = json::parse(r.err);
    CHECK(err["error"]["exit_code"] == 1);
    const std::string msg = err["error"]["message"];
    CHECK(msg.find("missing checkpoint") != std::string::npos);
    CHECK(msg.find((fs::path(work) / "agent1.damc").string()) != std::string::npos);

    r = run_cli("report --out " + work, scratch);
    CHECK(r.code == 1);
    CHECK(r.err.find("fold_report.json") != std::string::npos);
  }
  SUBCASE("exit codes for usage, config and ingestion failures") {
    CHECK(run_cli("", scratch).code == 1);
    CHECK(run_cli("train agent3 --out " + work, scratch).code == 1);
    io::write_text(dir.path / "bad_cfg.json", R"({"sed": 1})");
    r = run_cli("extract --manifest " + fx + "/manifest.json --out " + work + " --config " +
                    (dir.path / "bad_cfg.json").string(),
                scratch);
    CHECK(r.code == 1);
    CHECK(json::parse(r.err)["error"]["category"] == "config");
    io::write_text(dir.path / "bad_manifest.json", R"([{"id": "a", "label": 0, "frames": ["missing.ppm"]}])");
    r = run_cli("extract --manifest " + (dir.path / "bad_manifest.json").string() + " --out " + work, scratch);
    CHECK(r.code == 2);
    CHECK(json::parse(r.err)["error"]["category"] == "ingestion");
    CHECK(run_cli("gen-fixtures --out " + fx + " --samples 3", scratch).code == 1);
  }
  SUBCASE("full sequence, report parity and idempotence") {
    REQUIRE(run_cli("extract --manifest " + fx + "/manifest.json --out " + work + cfg, scratch).code == 0);
    REQUIRE(run_cli("train agent1 --out " + work + cfg, scratch).code == 0);
    REQUIRE(run_cli("train agent2 --out " + work + cfg, scratch).code == 0);
    const io::Bytes ckpt2 = io::read_file(fs::path(work) / "agent2.damc");
    REQUIRE(run_cli("predict --out " + work + cfg, scratch).code == 0);
    REQUIRE(run_cli("fuse --out " + work + cfg, scratch).code == 0);
    REQUIRE(run_cli("evaluate --out " + work, scratch).code == 0);
    r = run_cli("report --out " + work, scratch);
    REQUIRE(r.code == 0);

    const json fold = json::parse(io::read_text(fs::path(work) / "fold_report.json"));
    REQUIRE(fold["folds"].size() == 5);
    CHECK(fold["samples"] == 12);
    std::istringstream lines(r.out);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) rows.push_back(line);
    REQUIRE(rows.size() == 8);
    auto cells = [](const json& f) {
      std::string s;
      for (const char* k : {"accuracy", "precision", "recall", "f1", "auc"}) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.2f |", 100.0 * f[k].get<double>());
        s += buf;
      }
      return s;
    };
    for (int k = 0; k < 5; ++k) CHECK(rows[2 + k] == "| " + std::to_string(k + 1) + " |" + cells(fold["folds"][k]));
    CHECK(rows[7] == "| Mean |" + cells(fold["mean"]));
    for (int k = 1; k <= 5; ++k) {
      const std::string csv = io::read_text(fs::path(work) / ("roc_fold" + std::to_string(k) + ".csv"));
      CHECK(csv.rfind("fpr,tpr,threshold\n0,0,inf\n", 0) == 0);
      CHECK(csv.find("\n1,1,-inf\n") != std::string::npos);
    }
    const json eval = json::parse(io::read_text(fs::path(work) / "evaluation.json"));
    CHECK(eval["agent1"]["test"]["samples"] == 4);
    CHECK(eval["agent2"]["train"]["samples"] == 28);

    const io::Bytes report_bytes = io::read_file(fs::path(work) / "fold_report.json");
    REQUIRE(run_cli("fuse --out " + work + cfg, scratch).code == 0);
    CHECK(io::read_file(fs::path(work) / "fold_report.json") == report_bytes);
    REQUIRE(run_cli("train agent2 --out " + work + cfg, scratch).code == 0);
    CHECK(io::read_file(fs::path(work) / "agent2.damc") == ckpt2);

    r = run_cli("fuse --out " + work + cfg + " --fusion-samples all --meta-dims 4", scratch);
    REQUIRE(r.code == 0);
    const json every = json::parse(io::read_text(fs::path(work) / "fold_report.json"));
    CHECK(every["samples"] == 40);
    CHECK(every["meta_dims"] == 4);
  }
}
