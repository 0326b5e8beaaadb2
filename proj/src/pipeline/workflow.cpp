#include "deepagent/pipeline/workflow.hpp"

#include <cstdio>
#include <functional>
#include <memory>

#include "deepagent/agents/agent1.hpp"
#include "deepagent/agents/agent2.hpp"
#include "deepagent/audio/mfcc.hpp"
#include "deepagent/binary_io.hpp"
#include "deepagent/metrics/metrics.hpp"
#include "deepagent/nn/checkpoint.hpp"
#include "deepagent/text/similarity.hpp"
#include "deepagent/vision/frame.hpp"

namespace deepagent::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Re-raises library errors with the sample id in front, keeping the category.
template <typename F>
auto for_sample(const std::string& id, F&& f) -> decltype(f()) {
  const std::string ctx = "sample " + id + ": ";
  try {
    return f();
  } catch (const IngestionError& e) {
    throw IngestionError(ctx + e.what());
  } catch (const FeatureExtractionError& e) {
    throw FeatureExtractionError(ctx + e.what());
  } catch (const TrainingError& e) {
    throw TrainingError(ctx + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + e.what());
  } catch (const UsageError& e) {
    throw UsageError(ctx + e.what());
  }
}

void require_artifact(const fs::path& p, const std::string& hint) {
  if (!fs::exists(p)) throw UsageError("missing artifact " + p.string() + "; " + hint);
}

void require_checkpoint(const Workspace& ws, int agent) {
  for (const fs::path& p : {ws.checkpoint(agent), ws.model_info(agent)})
    if (!fs::exists(p))
      throw UsageError("missing checkpoint " + p.string() + "; run `deepagent train agent" + std::to_string(agent) +
                       "` first");
}

json read_json(const fs::path& p) {
  try {
    return json::parse(io::read_text(p));
  } catch (const json::parse_error& e) {
    throw IngestionError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) { io::write_text(p, j.dump(2) + "\n"); }

PipelineConfig prepared(const PipelineConfig& config) {
  PipelineConfig c = config;
  c.sync();
  c.validate();
  return c;
}

std::vector<SampleRecord> load_samples(const Workspace& ws) {
  require_artifact(ws.samples(), "run `deepagent extract` first");
  return load_manifest(ws.samples());
}

FeatureCache load_features(const Workspace& ws) {
  require_artifact(ws.features(), "run `deepagent extract` first");
  return FeatureCache::load(ws.features());
}

std::string feature_key(const std::string& id) { return "x/" + id; }

// ---- Agent-1 ---------------------------------------------------------------

std::vector<int> training_frames(const SampleRecord& r, const PipelineConfig& c) {
  const int n = static_cast<int>(r.frames.size());
  return c.frame_policy == FramePolicy::Interval5 ? vision::sample_interval(n, 5) : vision::sample_even(n, c.m);
}

void gather_frames(const std::vector<SampleRecord>& records, Split split, const PipelineConfig& c,
                   std::vector<vision::Frame>& frames, std::vector<int>& labels) {
  const int size = c.agent1_input_size();
  for (const SampleRecord* r : select(records, split))
    for (int k : training_frames(*r, c))
      for_sample(r->id, [&] {
        frames.push_back(agents::preprocess_frame(vision::load_frame(r->frames[static_cast<std::size_t>(k)]), size));
        labels.push_back(r->label);
      });
}

template <typename Scalar>
agents::TrainingHistory train_agent1_as(const std::vector<SampleRecord>& records, const Workspace& ws,
                                        const PipelineConfig& c) {
  std::vector<vision::Frame> train, val;
  std::vector<int> train_labels, val_labels;
  gather_frames(records, Split::Train, c, train, train_labels);
  gather_frames(records, Split::Val, c, val, val_labels);
  if (train.empty()) throw UsageError("agent1: the train split has no frames");
  auto model = agents::build_agent1<Scalar>(c.seed, c.agent1.arch);
  auto history = agents::train_agent1<Scalar>(model, train, train_labels, val, val_labels, c.agent1);
  nn::save_checkpoint(model, ws.checkpoint(1));
  write_json(ws.model_info(1), {{"agent", 1},
                                {"precision", to_string(c.precision)},
                                {"input_size", c.agent1.arch.input_size},
                                {"width_divisor", c.agent1.arch.width_divisor},
                                {"train_frames", train.size()},
                                {"val_frames", val.size()}});
  return history;
}

// ---- Agent-2 ---------------------------------------------------------------

void gather_features(const std::vector<SampleRecord>& records, Split split, const FeatureCache& cache,
                     Eigen::MatrixXd& x, std::vector<int>& labels) {
  const auto rows = select(records, split);
  x.resize(static_cast<Eigen::Index>(rows.size()), text::kFeatureDim);
  labels.clear();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::VectorXd& v = cache.get(feature_key(rows[i]->id));
    if (v.size() != text::kFeatureDim)
      throw IngestionError("feature of " + rows[i]->id + " has width " + std::to_string(v.size()));
    x.row(static_cast<Eigen::Index>(i)) = v.transpose();
    labels.push_back(rows[i]->label);
  }
}

template <typename Scalar>
agents::TrainingHistory train_agent2_as(const std::vector<SampleRecord>& records, const Workspace& ws,
                                        const PipelineConfig& c) {
  const FeatureCache cache = load_features(ws);
  Eigen::MatrixXd train, val;
  std::vector<int> train_labels, val_labels;
  gather_features(records, Split::Train, cache, train, train_labels);
  gather_features(records, Split::Val, cache, val, val_labels);
  auto model = agents::build_agent2<Scalar>(c.seed, c.agent2.arch);
  auto history = agents::train_agent2<Scalar>(model, train, train_labels, val, val_labels, c.agent2);
  nn::save_checkpoint(model, ws.checkpoint(2));
  const auto& a = c.agent2.arch;
  write_json(ws.model_info(2), {{"agent", 2},
                                {"precision", to_string(c.precision)},
                                {"input_width", a.input_width},
                                {"widths", a.widths},
                                {"dropout", a.dropout},
                                {"standardize", a.standardize}});
  return history;
}

// ---- Loaded models ---------------------------------------------------------

using FrameScorer = std::function<std::vector<double>(std::span<const vision::Frame>)>;
using FeatureScorer = std::function<std::vector<double>(const Eigen::MatrixXd&)>;

template <typename Scalar>
FrameScorer agent1_scorer(const Workspace& ws, int size, int divisor) {
  auto model = std::make_shared<nn::Sequential<Scalar>>(agents::build_agent1<Scalar>(0, {size, divisor}));
  nn::load_checkpoint(*model, ws.checkpoint(1));
  return [model, size](std::span<const vision::Frame> frames) { return agents::predict_frames(*model, frames, size); };
}

template <typename Scalar>
FeatureScorer agent2_scorer(const Workspace& ws, const agents::Agent2Options& arch) {
  auto model = std::make_shared<nn::Sequential<Scalar>>(agents::build_agent2<Scalar>(0, arch));
  nn::load_checkpoint(*model, ws.checkpoint(2));
  return [model](const Eigen::MatrixXd& x) { return agents::predict_agent2_batch(*model, x); };
}

std::pair<FrameScorer, int> load_agent1(const Workspace& ws) {
  require_checkpoint(ws, 1);
  const json info = read_json(ws.model_info(1));
  try {
    const int size = info.at("input_size").get<int>();
    const int divisor = info.at("width_divisor").get<int>();
    const Precision p = parse_precision(info.at("precision").get<std::string>());
    return {p == Precision::F64 ? agent1_scorer<double>(ws, size, divisor) : agent1_scorer<float>(ws, size, divisor),
            size};
  } catch (const json::exception& e) {
    throw IngestionError(ws.model_info(1).string() + ": " + e.what());
  }
}

FeatureScorer load_agent2(const Workspace& ws) {
  require_checkpoint(ws, 2);
  const json info = read_json(ws.model_info(2));
  try {
    agents::Agent2Options arch;
    arch.input_width = info.at("input_width").get<int>();
    arch.widths = info.at("widths").get<std::array<int, 3>>();
    arch.dropout = info.at("dropout").get<double>();
    arch.standardize = info.at("standardize").get<bool>();
    const Precision p = parse_precision(info.at("precision").get<std::string>());
    return p == Precision::F64 ? agent2_scorer<double>(ws, arch) : agent2_scorer<float>(ws, arch);
  } catch (const json::exception& e) {
    throw IngestionError(ws.model_info(2).string() + ": " + e.what());
  }
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExtractSummary extract(const fs::path& manifest, const Workspace& ws, const PipelineConfig& config) {
  const PipelineConfig c = prepared(config);
  auto records = load_manifest(manifest);
  if (records.empty()) throw IngestionError(manifest.string() + ": manifest has no records");
  std::size_t assigned = 0;
  for (const auto& r : records) assigned += r.split != Split::Unassigned;
  if (assigned == 0) {
    assign_splits(records, c.splits, c.seed);
  } else if (assigned != records.size()) {
    throw UsageError(manifest.string() + ": either every record or none may carry a split");
  }

  audio::AudioConfig audio_config;
  audio_config.mel_filters = c.mel_filters;
  FeatureCache cache;
  ExtractSummary summary;
  for (const auto& r : records) {
    for_sample(r.id, [&] {
      const auto a = audio::embed_audio_file(r.audio, audio_config);
      const auto asr = text::load_tokens(r.asr_text, text::TokenSource::Asr);
      const auto ocr = text::load_tokens(r.ocr_text, text::TokenSource::Ocr);
      const auto f = text::build_feature(a, asr, ocr);
      cache.put(feature_key(r.id), Eigen::VectorXd(f.x));
      cache.put("present/" + r.id, Eigen::Vector2d(f.audio_present ? 1.0 : 0.0, f.text_present ? 1.0 : 0.0));
      summary.with_audio += f.audio_present;
      summary.with_text += f.text_present;
    });
    ++summary.samples;
    ++summary.split_counts[to_string(r.split)];
  }
  fs::create_directories(ws.dir);
  cache.save(ws.features());
  write_manifest(ws.samples(), records);
  write_json(ws.dir / "config.json", to_json(c));
  return summary;
}

agents::TrainingHistory train(int agent, const Workspace& ws, const PipelineConfig& config) {
  if (agent != 1 && agent != 2) throw UsageError("agent must be 1 or 2");
  const PipelineConfig c = prepared(config);
  const auto records = load_samples(ws);
  agents::TrainingHistory history;
  if (agent == 1) {
    history = c.precision == Precision::F64 ? train_agent1_as<double>(records, ws, c)
                                            : train_agent1_as<float>(records, ws, c);
  } else {
    history = c.precision == Precision::F64 ? train_agent2_as<double>(records, ws, c)
                                            : train_agent2_as<float>(records, ws, c);
  }
  write_json(ws.history(agent), agents::to_json(history));
  return history;
}

VideoScores predict(const Workspace& ws, const PipelineConfig& config) {
  const PipelineConfig c = prepared(config);
  const auto records = load_samples(ws);
  auto [agent1, size] = load_agent1(ws);
  const FeatureScorer agent2 = load_agent2(ws);
  const FeatureCache features = load_features(ws);

  VideoScores out;
  FeatureCache cache;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), text::kFeatureDim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const SampleRecord& r = records[i];
    double p1 = 0.5;  // no frames: Agent-1 abstains
    if (!r.frames.empty()) {
      p1 = for_sample(r.id, [&] {
        std::vector<vision::Frame> frames;
        for (int k : vision::sample_even(static_cast<int>(r.frames.size()), c.m))
          frames.push_back(agents::preprocess_frame(vision::load_frame(r.frames[static_cast<std::size_t>(k)]), size));
        const auto scores = agent1(frames);
        return agents::aggregate_video(scores);
      });
    }
    out.agent1.push_back({r.id, p1});
    x.row(static_cast<Eigen::Index>(i)) = features.get(feature_key(r.id)).transpose();
  }
  const auto p2 = agent2(x);
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.agent2.push_back({records[i].id, p2[i]});
    cache.put("agent1/" + records[i].id, Eigen::VectorXd::Constant(1, out.agent1[i].score));
    cache.put("agent2/" + records[i].id, Eigen::VectorXd::Constant(1, p2[i]));
  }
  cache.save(ws.scores());
  return out;
}

fusion::CrossValidationReport fuse(const Workspace& ws, const PipelineConfig& config) {
  const PipelineConfig c = prepared(config);
  require_checkpoint(ws, 1);
  require_checkpoint(ws, 2);
  const auto records = load_samples(ws);
  const VideoScores scores = predict(ws, c);

  std::vector<fusion::AgentScore> a1, a2;
  std::vector<fusion::LabeledId> labels;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (c.fusion_samples == FusionSamples::HeldOut && records[i].split == Split::Train) continue;
    a1.push_back(scores.agent1[i]);
    a2.push_back(scores.agent2[i]);
    labels.push_back({records[i].id, records[i].label});
  }
  const auto meta = fusion::build_meta_features(a1, a2, labels, c.meta_dims);
  const auto report = fusion::cross_validate(meta, c.fusion);
  json j = fusion::to_json(report);
  j["samples"] = meta.size();
  j["meta_dims"] = c.meta_dims;
  j["fusion_samples"] = to_string(c.fusion_samples);
  write_json(ws.fold_report(), j);
  return report;
}

json evaluate(const Workspace& ws) {
  const auto records = load_samples(ws);
  require_artifact(ws.scores(), "run `deepagent predict` or `deepagent fuse` first");
  const FeatureCache scores = FeatureCache::load(ws.scores());
  json out = json::object();
  for (int agent : {1, 2}) {
    json per_split = json::object();
    for (Split split : {Split::Train, Split::Val, Split::Test}) {
      std::vector<int> labels, preds;
      std::vector<double> p;
      for (const SampleRecord* r : select(records, split)) {
        const double s = scores.get("agent" + std::to_string(agent) + "/" + r->id)[0];
        labels.push_back(r->label);
        p.push_back(s);
        preds.push_back(s >= 0.5 ? 1 : 0);
      }
      const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
      json entry = both ? metrics::to_json(metrics::evaluate(labels, preds, p)) : json{{"skipped", "needs both classes"}};
      entry["samples"] = labels.size();
      per_split[to_string(split)] = entry;
    }
    out["agent" + std::to_string(agent)] = per_split;
  }
  write_json(ws.evaluation(), out);
  return out;
}

std::string render_fold_table(const fusion::CrossValidationReport& r) {
  std::string s = "| Fold | Accuracy (%) | Precision (%) | Recall (%) | F1 Score (%) | AUC (%) |\n"
                  "|------|--------------|---------------|------------|--------------|---------|\n";
  auto row = [&](const std::string& name, const fusion::FoldResult& f) {
    s += "| " + name + " | " + percent(f.accuracy) + " | " + percent(f.precision) + " | " + percent(f.recall) + " | " +
         percent(f.f1) + " | " + percent(f.auc) + " |\n";
  };
  for (const auto& f : r.folds) row(std::to_string(f.fold), f);
  row("Mean", r.mean);
  return s;
}

std::string render_roc_csv(const metrics::RocCurve& roc) {
  std::string s = "fpr,tpr,threshold\n";
  for (const auto& p : roc.points) s += number(p.fpr) + "," + number(p.tpr) + "," + number(p.threshold) + "\n";
  return s;
}

std::string report(const Workspace& ws) {
  require_artifact(ws.fold_report(), "run `deepagent fuse` first");
  const auto r = fusion::report_from_json(read_json(ws.fold_report()));
  std::string table = render_fold_table(r);
  std::string doc = "# Meta-classifier cross-validation\n\n" + table +
                    "\nPrecision and recall take the fake class as positive; F1 is the macro average over both "
                    "classes.\n\n| Fold | Macro Precision (%) | Macro Recall (%) | TP | FP | FN | TN |\n"
                    "|------|---------------------|------------------|----|----|----|----|\n";
  for (const auto& f : r.folds) {
    doc += "| " + std::to_string(f.fold) + " | " + percent(f.macro_precision) + " | " + percent(f.macro_recall) +
           " | " + std::to_string(f.confusion.tp) + " | " + std::to_string(f.confusion.fp) + " | " +
           std::to_string(f.confusion.fn) + " | " + std::to_string(f.confusion.tn) + " |\n";
    io::write_text(ws.roc_csv(f.fold), render_roc_csv(f.roc));
  }
  doc += "| Mean | " + percent(r.mean.macro_precision) + " | " + percent(r.mean.macro_recall) + " | | | | |\n";
  io::write_text(ws.report_table(), doc);
  return table;
}

}  // namespace deepagent::pipeline
