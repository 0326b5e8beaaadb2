#include "deepagent/fusion/cross_validation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include "deepagent/errors.hpp"

namespace deepagent::fusion {

namespace {

std::map<std::string, double> index_scores(std::span<const AgentScore> scores, const char* agent) {
  std::map<std::string, double> out;
  for (const auto& s : scores)
    if (!out.emplace(s.id, s.score).second)
      throw UsageError(std::string(agent) + " lists sample \"" + s.id + "\" more than once");
  return out;
}

}  // namespace

std::vector<MetaFeature> build_meta_features(std::span<const AgentScore> agent1, std::span<const AgentScore> agent2,
                                             std::span<const LabeledId> labels, int meta_dims) {
  if (meta_dims != 2 && meta_dims != 4) throw ConfigError("meta_dims must be 2 or 4");
  const auto s1 = index_scores(agent1, "agent1"), s2 = index_scores(agent2, "agent2");
  std::map<std::string, int> seen;
  std::vector<std::string> unmatched;
  for (const auto& l : labels) {
    seen[l.id] += 1;
    if (!s1.count(l.id) || !s2.count(l.id)) unmatched.push_back(l.id);
  }
  for (const auto& [id, _] : s1)
    if (!seen.count(id)) unmatched.push_back(id);
  for (const auto& [id, _] : s2)
    if (!seen.count(id) && !s1.count(id)) unmatched.push_back(id);
  if (!unmatched.empty()) {
    std::string msg = "unmatched sample ids:";
    for (const auto& id : unmatched) msg += " " + id;
    throw UsageError(msg);
  }

  std::vector<MetaFeature> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    if (seen[l.id] > 1) throw UsageError("label list repeats sample \"" + l.id + "\"");
    const double p1 = s1.at(l.id), p2 = s2.at(l.id);
    MetaFeature m{l.id, Eigen::VectorXd(meta_dims), l.label};
    if (meta_dims == 2) {
      m.z << p1, p2;
    } else {
      m.z << 1.0 - p1, p1, 1.0 - p2, p2;
    }
    out.push_back(std::move(m));
  }
  return out;
}

Eigen::MatrixXd meta_matrix(std::span<const MetaFeature> features) {
  if (features.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(features.size()), features.front().z.size());
  for (std::size_t i = 0; i < features.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = features[i].z.transpose();
  return m;
}

std::vector<Fold> stratified_kfold(std::span<const int> labels, int k, Rng& rng) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  std::array<std::vector<int>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw UsageError("labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  for (int c = 0; c < 2; ++c)
    if (static_cast<int>(by_class[c].size()) < k)
      throw UsageError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                       " samples, fewer than " + std::to_string(k) + " folds");

  std::vector<int> assignment(labels.size());
  int next = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (int i : members) {
      assignment[static_cast<std::size_t>(i)] = next;
      next = (next + 1) % k;
    }
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (int f = 0; f < k; ++f)
      (assignment[i] == f ? folds[f].validation : folds[f].train).push_back(static_cast<int>(i));
  return folds;
}

CrossValidationReport cross_validate(std::span<const MetaFeature> features, const CrossValidationConfig& config) {
  const Eigen::MatrixXd z = meta_matrix(features);
  std::vector<int> labels;
  for (const auto& f : features) labels.push_back(f.label);

  Rng rng(config.seed);
  const auto folds = stratified_kfold(labels, config.folds, rng);
  CrossValidationReport report;
  report.mean.fold = -1;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    const auto& fold = folds[k];
    Eigen::MatrixXd train(static_cast<Eigen::Index>(fold.train.size()), z.cols());
    std::vector<int> train_labels;
    for (std::size_t i = 0; i < fold.train.size(); ++i) {
      train.row(static_cast<Eigen::Index>(i)) = z.row(fold.train[i]);
      train_labels.push_back(labels[static_cast<std::size_t>(fold.train[i])]);
    }
    const RandomForest forest =
        RandomForest::fit(train, train_labels, config.forest, Rng(config.seed).derive(1000 + k).seed());

    std::vector<int> truth, predicted;
    std::vector<double> scores;
    for (int i : fold.validation) {
      const double p = forest.probability(z.row(i).transpose());
      truth.push_back(labels[static_cast<std::size_t>(i)]);
      scores.push_back(p);
      predicted.push_back(RandomForest::label_for(p));
    }
    const auto m = metrics::evaluate(truth, predicted, scores);
    FoldResult r;
    r.fold = static_cast<int>(k) + 1;
    r.accuracy = m.accuracy;
    r.precision = m.precision[1].value;
    r.recall = m.recall[1].value;
    r.f1 = m.macro_f1;
    r.auc = m.auc;
    r.macro_precision = m.macro_precision;
    r.macro_recall = m.macro_recall;
    r.confusion = m.confusion;
    r.roc = metrics::roc_auc(truth, scores);
    report.folds.push_back(std::move(r));
  }
  const double n = static_cast<double>(report.folds.size());
  for (const auto& r : report.folds) {
    report.mean.accuracy += r.accuracy / n;
    report.mean.precision += r.precision / n;
    report.mean.recall += r.recall / n;
    report.mean.f1 += r.f1 / n;
    report.mean.auc += r.auc / n;
    report.mean.macro_precision += r.macro_precision / n;
    report.mean.macro_recall += r.macro_recall / n;
    report.mean.confusion.tp += r.confusion.tp;
    report.mean.confusion.fp += r.confusion.fp;
    report.mean.confusion.fn += r.confusion.fn;
    report.mean.confusion.tn += r.confusion.tn;
  }
  return report;
}

nlohmann::json to_json(const FoldResult& r) {
  nlohmann::json j = {
      {"accuracy", r.accuracy},
      {"precision", r.precision},
      {"recall", r.recall},
      {"f1", r.f1},
      {"auc", r.auc},
      {"macro_precision", r.macro_precision},
      {"macro_recall", r.macro_recall},
      {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}}},
  };
  if (!r.roc.points.empty()) {
    // JSON has no infinities; the sentinel thresholds are written as strings.
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : r.roc.points) {
      nlohmann::json t = p.threshold;
      if (std::isinf(p.threshold)) t = p.threshold > 0 ? "+inf" : "-inf";
      points.push_back({p.fpr, p.tpr, t});
    }
    j["roc"] = points;
  }
  if (r.fold >= 0) {
    j["fold"] = r.fold;
  } else {
    j["fold"] = "mean";
  }
  return j;
}

nlohmann::json to_json(const CrossValidationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& f : r.folds) rows.push_back(to_json(f));
  return {{"folds", rows}, {"mean", to_json(r.mean)}};
}

CrossValidationReport report_from_json(const nlohmann::json& j) {
  auto row = [](const nlohmann::json& x) {
    FoldResult r;
    r.fold = x.at("fold").is_number() ? x.at("fold").get<int>() : -1;
    r.accuracy = x.at("accuracy").get<double>();
    r.precision = x.at("precision").get<double>();
    r.recall = x.at("recall").get<double>();
    r.f1 = x.at("f1").get<double>();
    r.auc = x.at("auc").get<double>();
    r.macro_precision = x.value("macro_precision", 0.0);
    r.macro_recall = x.value("macro_recall", 0.0);
    if (x.contains("roc")) {
      for (const auto& p : x.at("roc")) {
        metrics::RocPoint pt{p.at(0).get<double>(), p.at(1).get<double>(), 0.0};
        const auto& t = p.at(2);
        if (t.is_string()) {
          const std::string v = t.get<std::string>();
          if (v != "+inf" && v != "-inf") throw IngestionError("malformed fold report: bad ROC threshold " + v);
          pt.threshold = (v == "+inf" ? 1.0 : -1.0) * std::numeric_limits<double>::infinity();
        } else {
          pt.threshold = t.get<double>();
        }
        r.roc.points.push_back(pt);
      }
      r.roc.auc = r.auc;
    }
    if (x.contains("confusion")) {
      const auto& c = x.at("confusion");
      r.confusion = {c.at("tp").get<long>(), c.at("fp").get<long>(), c.at("fn").get<long>(), c.at("tn").get<long>()};
    }
    return r;
  };
  CrossValidationReport r;
  try {
    for (const auto& f : j.at("folds")) r.folds.push_back(row(f));
    r.mean = row(j.at("mean"));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("malformed fold report: ") + e.what());
  }
  return r;
}

}  // namespace deepagent::fusion
