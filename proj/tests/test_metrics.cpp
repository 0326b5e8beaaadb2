#include "doctest.h"

#include <vector>

#include "deepagent/errors.hpp"
#include "deepagent/metrics/metrics.hpp"
#include "deepagent/rng.hpp"
#include "reference_metrics.hpp"

using namespace deepagent;
using namespace deepagent::metrics;

using Ints = std::vector<int>;
using Reals = std::vector<double>;

TEST_CASE("confusion") {
  const auto perfect = confusion(Ints{1, 0, 1, 0}, Ints{1, 0, 1, 0});
  CHECK(perfect.tp == 2);
  CHECK(perfect.tn == 2);
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);

  const auto wrong = confusion(Ints{1, 0, 1, 0}, Ints{0, 1, 0, 1});
  CHECK(wrong.tp + wrong.tn == 0);

  const auto mixed = confusion(Ints{1, 1, 0, 0}, Ints{1, 0, 1, 0});
  CHECK(mixed.tp == 1);
  CHECK(mixed.fn == 1);
  CHECK(mixed.fp == 1);
  CHECK(mixed.tn == 1);
  CHECK(mixed.counts(0).tp == mixed.counts(1).tn);

  CHECK_THROWS_AS(confusion(Ints{1, 0}, Ints{1}), UsageError);
  CHECK_THROWS_AS(confusion(Ints{2}, Ints{1}), UsageError);
}

TEST_CASE("precision, recall, f1") {
  const auto perfect = confusion(Ints{1, 0, 1, 0}, Ints{1, 0, 1, 0});
  CHECK(accuracy(perfect) == 1.0);
  CHECK(macro_f1(perfect) == 1.0);
  for (int c = 0; c < 2; ++c) {
    CHECK(precision(perfect, c).value == 1.0);
    CHECK(recall(perfect, c).value == 1.0);
  }

  const auto mixed = confusion(Ints{1, 1, 0, 0}, Ints{1, 0, 1, 0});
  CHECK(f1(mixed, 0).value == 0.5);
  CHECK(f1(mixed, 1).value == 0.5);
  CHECK(macro_f1(mixed) == 0.5);
  CHECK(precision(mixed, 1).value == 0.5);
  CHECK(recall(mixed, 1).value == 0.5);

  const auto all_one = confusion(Ints{1, 1, 0, 0}, Ints{1, 1, 1, 1});
  CHECK(f1(all_one, 1).value == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(f1(all_one, 0).value == 0.0);
  CHECK(macro_f1(all_one) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto none = confusion(Ints{1, 0, 0}, Ints{0, 0, 0});
  CHECK(precision(none, 1).value == 0.0);
  CHECK(precision(none, 1).undefined);
  CHECK_FALSE(precision(none, 0).undefined);

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + rng.below(60);
    Ints y(n), p(n), y_swapped(n), p_swapped(n);
    long diag = 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.below(2));
      p[i] = static_cast<int>(rng.below(2));
      y_swapped[i] = 1 - y[i];
      p_swapped[i] = 1 - p[i];
      diag += y[i] == p[i];
    }
    const auto cm = confusion(y, p);
    CHECK(accuracy(cm) == static_cast<double>(diag) / static_cast<double>(n));
    CHECK(cm.total() == static_cast<long>(n));
    CHECK(macro_f1(cm) == doctest::Approx(macro_f1(confusion(y_swapped, p_swapped))).epsilon(1e-15));
  }
}

TEST_CASE("roc_auc") {
  CHECK(roc_auc(Ints{0, 0, 1, 1}, Reals{0.1, 0.2, 0.8, 0.9}).auc == 1.0);
  CHECK(roc_auc(Ints{0, 1, 0, 1, 1}, Reals{0.3, 0.3, 0.3, 0.3, 0.3}).auc == 0.5);
  CHECK(roc_auc(Ints{1, 0, 1, 0}, Reals{0.9, 0.8, 0.7, 0.1}).auc == 0.75);
  CHECK_THROWS_AS(roc_auc(Ints{1, 1}, Reals{0.1, 0.2}), UsageError);

  const auto curve = roc_auc(Ints{1, 0, 1, 0, 1}, Reals{0.9, 0.9, 0.4, 0.2, 0.1});
  CHECK(curve.points.front().fpr == 0.0);
  CHECK(curve.points.front().tpr == 0.0);
  CHECK(curve.points.back().fpr == 1.0);
  CHECK(curve.points.back().tpr == 1.0);
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
    CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
    CHECK(curve.points[i].threshold < curve.points[i - 1].threshold);
  }

  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 2 + rng.below(199);
    Ints y(n);
    Reals s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.below(2));
      // Coarse scores so ties are common.
      s[i] = static_cast<double>(rng.below(trial % 2 == 0 ? 7 : 1000)) / 7.0;
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(std::abs(roc_auc(y, s).auc - reference::pairwise_auc(y, s)) < 1e-12);
  }
}

TEST_CASE("evaluate and json") {
  const auto r = evaluate(Ints{1, 1, 0, 0}, Ints{1, 0, 1, 0}, Reals{0.9, 0.4, 0.6, 0.1});
  CHECK(r.accuracy == 0.5);
  CHECK(r.macro_f1 == 0.5);
  CHECK(r.auc == 0.75);
  const auto j = to_json(r);
  for (const char* key : {"accuracy", "precision_per_class", "recall_per_class", "f1_per_class", "macro_f1", "auc",
                          "confusion"})
    CHECK(j.contains(key));
  CHECK(j["f1_per_class"][1].get<double>() == 0.5);
  CHECK(j["confusion"]["tp"].get<long>() == 1);
}
