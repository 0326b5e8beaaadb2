// Command line front end for the detection pipeline.
//
//   deepagent gen-fixtures --out DIR [--samples N --strength S --gap G --seed K]
//   deepagent extract --manifest FILE --out WORK
//   deepagent train agent1|agent2 --out WORK
//   deepagent predict | fuse | evaluate | report --out WORK
//
// Exit codes: 0 success, 1 usage/config, 2 ingestion, 3 numeric. Failures
// print {"error": {...}} on stderr.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "deepagent/errors.hpp"
#include "deepagent/pipeline/config.hpp"
#include "deepagent/pipeline/fixtures.hpp"
#include "deepagent/pipeline/workflow.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace deepagent;
using namespace deepagent::pipeline;
using nlohmann::json;

namespace {

struct ConfigFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> frame_policy;
  std::optional<int> m;
  std::optional<int> meta_dims;
  std::optional<std::string> precision;
  std::optional<std::string> fusion_samples;
  bool desk_scale = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON config file (default: $DEEPAGENT_CONFIG)");
    app->add_option("--seed", seed, "global seed");
    app->add_option("--frame-policy", frame_policy, "Agent-1 training frames")->check(CLI::IsMember({"interval5", "even"}));
    app->add_option("--m", m, "frames per video for scoring and the even policy")->check(CLI::PositiveNumber);
    app->add_option("--meta-dims", meta_dims, "meta-feature width")->check(CLI::IsMember({2, 4}));
    app->add_option("--precision", precision, "network scalar type")->check(CLI::IsMember({"f64", "f32"}));
    app->add_option("--fusion-samples", fusion_samples, "videos used for cross-validation")
        ->check(CLI::IsMember({"all", "held_out"}));
    app->add_flag("--desk-scale", desk_scale, "64x64 Agent-1 input");
  }

  PipelineConfig resolve() const {
    PipelineConfig c = load_config(config ? std::optional<fs::path>(*config) : std::nullopt);
    if (seed) c.seed = *seed;
    if (frame_policy) c.frame_policy = parse_frame_policy(*frame_policy);
    if (m) c.m = *m;
    if (meta_dims) c.meta_dims = *meta_dims;
    if (precision) c.precision = parse_precision(*precision);
    if (fusion_samples) c.fusion_samples = parse_fusion_samples(*fusion_samples);
    if (desk_scale) c.desk_scale = true;
    c.sync();
    c.validate();
    return c;
  }
};

json fold_json(const fusion::FoldResult& f) {
  return {{"accuracy", f.accuracy}, {"precision", f.precision}, {"recall", f.recall}, {"f1", f.f1}, {"auc", f.auc}};
}

int fail(const std::string& category, int code, const std::string& message) {
  std::cerr << json{{"error", {{"category", category}, {"exit_code", code}, {"message", message}}}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal deepfake detection pipeline"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every command");

  std::string out;
  std::string manifest;
  ConfigFlags flags;

  FixtureOptions fixture;
  auto* gen = app.add_subcommand("gen-fixtures", "write a synthetic corpus and its manifest");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--samples", fixture.samples, "sample count (even)");
  gen->add_option("--strength", fixture.strength, "artifact strength in [0, 1]");
  gen->add_option("--gap", fixture.gap, "ASR/OCR overlap gap in [0, 1]");
  gen->add_option("--seed", fixture.seed, "fixture seed");
  gen->add_option("--frames", fixture.frames_per_video, "frames per video");
  gen->add_option("--frame-size", fixture.frame_size, "frame width and height");

  auto* extract_cmd = app.add_subcommand("extract", "validate the manifest, assign splits, cache features");
  extract_cmd->add_option("--manifest", manifest, "manifest JSON")->required();
  extract_cmd->add_option("--out", out, "working directory")->required();
  flags.attach(extract_cmd);

  std::string agent;
  auto* train_cmd = app.add_subcommand("train", "train one agent");
  train_cmd->add_option("agent", agent, "agent1 or agent2")->required()->check(CLI::IsMember({"agent1", "agent2"}));
  train_cmd->add_option("--out", out, "working directory")->required();
  flags.attach(train_cmd);

  auto* predict_cmd = app.add_subcommand("predict", "score every video with both agents");
  auto* fuse_cmd = app.add_subcommand("fuse", "meta-classifier cross-validation over agent scores");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "per-split metrics of both agents");
  auto* report_cmd = app.add_subcommand("report", "fold table and ROC CSVs");
  for (auto* cmd : {predict_cmd, fuse_cmd, evaluate_cmd, report_cmd}) {
    cmd->add_option("--out", out, "working directory")->required();
    if (cmd != report_cmd && cmd != evaluate_cmd) flags.attach(cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", 1, e.what());
  }

  try {
    const Workspace ws{out};
    json result;
    if (gen->parsed()) {
      const fs::path m = gen_fixtures(out, fixture);
      result = {{"manifest", m.string()}, {"samples", fixture.samples}};
    } else if (extract_cmd->parsed()) {
      const auto s = extract(manifest, ws, flags.resolve());
      result = {{"samples", s.samples}, {"with_audio", s.with_audio}, {"with_text", s.with_text}, {"splits", s.split_counts}};
    } else if (train_cmd->parsed()) {
      const int which = agent == "agent1" ? 1 : 2;
      const auto h = train(which, ws, flags.resolve());
      const auto& last = h.epochs.back();
      result = {{"agent", which},
                {"epochs", h.epochs.size()},
                {"best_epoch", h.best_epoch},
                {"stopped_early", h.stopped_early},
                {"train_acc", last.train_acc},
                {"val_acc", last.val_acc},
                {"checkpoint", ws.checkpoint(which).string()}};
    } else if (predict_cmd->parsed()) {
      const auto s = predict(ws, flags.resolve());
      result = {{"videos", s.agent1.size()}, {"scores", ws.scores().string()}};
    } else if (fuse_cmd->parsed()) {
      const auto r = fuse(ws, flags.resolve());
      result = {{"mean", fold_json(r.mean)}, {"fold_report", ws.fold_report().string()}};
    } else if (evaluate_cmd->parsed()) {
      result = evaluate(ws);
    } else if (report_cmd->parsed()) {
      std::cout << report(ws);
      return 0;
    }
    std::cout << result.dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    return fail(e.category(), static_cast<int>(e.kind()), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("ingestion", 2, e.what());
  } catch (const json::exception& e) {
    return fail("ingestion", 2, e.what());
  } catch (const std::exception& e) {
    return fail("numeric", 3, e.what());
  }
}
