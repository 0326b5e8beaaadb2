#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "deepagent/agents/training.hpp"
#include "deepagent/fusion/cross_validation.hpp"
#include "deepagent/pipeline/config.hpp"
#include "deepagent/pipeline/feature_cache.hpp"
#include "deepagent/pipeline/manifest.hpp"
#include "json.hpp"

namespace deepagent::pipeline {

/// Artifact locations inside one working directory.
struct Workspace {
  std::filesystem::path dir;

  std::filesystem::path samples() const { return dir / "samples.json"; }
  std::filesystem::path features() const { return dir / "features.daft"; }
  std::filesystem::path checkpoint(int agent) const { return dir / ("agent" + std::to_string(agent) + ".damc"); }
  std::filesystem::path model_info(int agent) const { return dir / ("agent" + std::to_string(agent) + ".json"); }
  std::filesystem::path history(int agent) const {
    return dir / ("agent" + std::to_string(agent) + "_history.json");
  }
  std::filesystem::path scores() const { return dir / "scores.daft"; }
  std::filesystem::path fold_report() const { return dir / "fold_report.json"; }
  std::filesystem::path evaluation() const { return dir / "evaluation.json"; }
  std::filesystem::path report_table() const { return dir / "report.md"; }
  std::filesystem::path roc_csv(int fold) const { return dir / ("roc_fold" + std::to_string(fold) + ".csv"); }
};

struct ExtractSummary {
  int samples = 0;
  int with_audio = 0;
  int with_text = 0;
  std::map<std::string, int> split_counts;
};

/// Validates the manifest, assigns splits when none are given, computes the
/// 14-wide multimodal feature of every sample and writes samples.json and
/// features.daft.
ExtractSummary extract(const std::filesystem::path& manifest, const Workspace& ws, const PipelineConfig& config);

/// Trains agent 1 or 2 on the train split (validation on the val split) and
/// writes the checkpoint, its model description and the history.
agents::TrainingHistory train(int agent, const Workspace& ws, const PipelineConfig& config);

struct VideoScores {
  std::vector<fusion::AgentScore> agent1, agent2;
};

/// Per-video scores of both agents for every sample: the Agent-1 fake
/// probability averaged over up to m evenly spaced frames, and the Agent-2
/// output on the cached feature. Written to scores.daft.
VideoScores predict(const Workspace& ws, const PipelineConfig& config);

/// Scores every video, builds meta-features and runs stratified
/// cross-validation of the forest. Writes fold_report.json.
fusion::CrossValidationReport fuse(const Workspace& ws, const PipelineConfig& config);

/// Metric reports of both agents per split from scores.daft.
nlohmann::json evaluate(const Workspace& ws);

/// Renders fold_report.json as report.md and one ROC CSV per fold; returns the table.
std::string report(const Workspace& ws);

/// Percentages with two decimals; fold rows then a Mean row.
std::string render_fold_table(const fusion::CrossValidationReport& r);
std::string render_roc_csv(const metrics::RocCurve& roc);

}  // namespace deepagent::pipeline
