#include "doctest.h"

#include "oracles.hpp"
#include "weedpilot/eval/bench.hpp"
#include "weedpilot/eval/metrics.hpp"

using namespace weedpilot;
using eval::ConfusionMatrix;

namespace {

void random_stream(Rng& rng, int n, int classes, std::vector<int>& preds,
                   std::vector<int>& labels) {
  preds.resize(n);
  labels.resize(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(rng.below(classes));
    // correlate predictions with labels so diagonals dominate
    preds[i] = rng.bernoulli(0.7) ? labels[i] : static_cast<int>(rng.below(classes));
  }
}

}  // namespace

TEST_CASE("confusion matrix") {
  SUBCASE("predictions equal to labels give a diagonal matrix") {
    std::vector<int> v{0, 3, 7, 15, 3, 0};
    ConfusionMatrix cm = eval::confusion_matrix(v, v, 16);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c)
        if (r != c) CHECK(cm.at(r, c) == 0);
    CHECK(cm.at(3, 3) == 2);
    CHECK(cm.total() == 6);
  }

  SUBCASE("a single (t=2, p=7) pair fills exactly one cell") {
    ConfusionMatrix cm = eval::confusion_matrix({7}, {2}, 16);
    CHECK(cm.at(2, 7) == 1);
    CHECK(cm.total() == 1);
  }

  SUBCASE("row sums equal per-class label counts on 1000 random pairs") {
    Rng rng(3);
    std::vector<int> preds, labels;
    random_stream(rng, 1000, 16, preds, labels);
    ConfusionMatrix cm = eval::confusion_matrix(preds, labels, 16);
    std::vector<long long> counts(16, 0);
    for (int l : labels) counts[l]++;  // counting oracle
    for (int c = 0; c < 16; ++c) CHECK(cm.row_sum(c) == counts[c]);
  }

  SUBCASE("out-of-range ids are rejected") {
    CHECK_THROWS_AS(eval::confusion_matrix({16}, {0}, 16), Error);
    CHECK_THROWS_AS(eval::confusion_matrix({0}, {-1}, 16), Error);
  }
}

TEST_CASE("precision / recall / F1") {
  SUBCASE("perfect diagonal yields (1,1,1) everywhere") {
    std::vector<int> v;
    for (int c = 0; c < 16; ++c) v.insert(v.end(), 3, c);
    ConfusionMatrix cm = eval::confusion_matrix(v, v, 16);
    for (int c = 0; c < 16; ++c) {
      auto r = eval::precision_recall_f1(cm, c);
      CHECK(r.precision == 1.0);
      CHECK(r.recall == 1.0);
      CHECK(r.f1 == 1.0);
    }
  }

  SUBCASE("two-class worked example [[8,2],[1,9]]") {
    ConfusionMatrix cm(2);
    for (int i = 0; i < 8; ++i) cm.record(0, 0);
    for (int i = 0; i < 2; ++i) cm.record(0, 1);
    for (int i = 0; i < 1; ++i) cm.record(1, 0);
    for (int i = 0; i < 9; ++i) cm.record(1, 1);
    auto r = eval::precision_recall_f1(cm, 0);
    CHECK(r.precision == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(0.8421052631578948).epsilon(1e-12));
  }

  SUBCASE("precision 0.8 and recall 0.6 give F1 = 0.6857142857...") {
    // tp=12, fp=3 -> precision .8; fn=8 -> recall .6
    ConfusionMatrix cm(2);
    for (int i = 0; i < 12; ++i) cm.record(0, 0);
    for (int i = 0; i < 8; ++i) cm.record(0, 1);
    for (int i = 0; i < 3; ++i) cm.record(1, 0);
    cm.record(1, 1);
    auto r = eval::precision_recall_f1(cm, 0);
    CHECK(r.precision == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(0.6857142857142857).epsilon(1e-12));
  }

  SUBCASE("degenerate denominators fall back to zero") {
    ConfusionMatrix cm(3);
    cm.record(0, 1);  // class 2 never appears
    auto r = eval::precision_recall_f1(cm, 2);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
  }

  SUBCASE("F1 is the harmonic mean: bounded by min and max of (p, r)") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<int> preds, labels;
      random_stream(rng, 200, 16, preds, labels);
      ConfusionMatrix cm = eval::confusion_matrix(preds, labels, 16);
      for (int c = 0; c < 16; ++c) {
        auto r = eval::precision_recall_f1(cm, c);
        CHECK(r.f1 <= std::max(r.precision, r.recall) + 1e-15);
        if (r.precision + r.recall > 0)
          CHECK(r.f1 + 1e-15 >= std::min(r.precision, r.recall));
        // and never above the arithmetic mean
        CHECK(r.f1 <= 0.5 * (r.precision + r.recall) + 1e-15);
      }
    }
  }
}

TEST_CASE("average class accuracy") {
  SUBCASE("perfect diagonal gives 1.0") {
    std::vector<int> v;
    for (int c = 0; c < 16; ++c) v.insert(v.end(), 2, c);
    CHECK(eval::avg_class_accuracy(eval::confusion_matrix(v, v, 16)) == 1.0);
  }

  SUBCASE("one class fully wrong out of 16 gives 15/16") {
    std::vector<int> preds, labels;
    for (int c = 0; c < 16; ++c)
      for (int i = 0; i < 4; ++i) {
        labels.push_back(c);
        preds.push_back(c == 5 ? (c + 1) % 16 : c);
      }
    CHECK(eval::avg_class_accuracy(eval::confusion_matrix(preds, labels, 16)) ==
          doctest::Approx(0.9375).epsilon(1e-12));
  }

  SUBCASE("random matrix matches the brute-force recount to 1e-12") {
    Rng rng(23);
    std::vector<int> preds, labels;
    random_stream(rng, 700, 16, preds, labels);
    ConfusionMatrix cm = eval::confusion_matrix(preds, labels, 16);
    CHECK(eval::avg_class_accuracy(cm) ==
          doctest::Approx(oracles::naive_avg_class_accuracy(preds, labels, 16)).epsilon(1e-12));
  }

  SUBCASE("empty class rows are excluded with a count") {
    ConfusionMatrix cm(4);
    cm.record(0, 0);
    cm.record(1, 1);
    int excluded = 0;
    double acc = eval::avg_class_accuracy(cm, &excluded);
    CHECK(acc == 1.0);
    CHECK(excluded == 2);
  }
}

TEST_CASE("report against the naive per-sample recount oracle") {
  Rng rng(37);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 20 + static_cast<int>(rng.below(480));
    std::vector<int> preds, labels;
    random_stream(rng, n, 16, preds, labels);
    ConfusionMatrix cm = eval::confusion_matrix(preds, labels, 16);
    for (int c = 0; c < 16; ++c) {
      auto got = eval::precision_recall_f1(cm, c);
      auto want = oracles::naive_prf1(preds, labels, c);
      CHECK(got.precision == doctest::Approx(want.precision).epsilon(1e-12));
      CHECK(got.recall == doctest::Approx(want.recall).epsilon(1e-12));
      CHECK(got.f1 == doctest::Approx(want.f1).epsilon(1e-12));
    }
  }
}

TEST_CASE("report is invariant to evaluation order") {
  Rng rng(41);
  std::vector<int> preds, labels;
  random_stream(rng, 300, 16, preds, labels);
  std::vector<std::string> names;
  for (int c = 0; c < 16; ++c) names.push_back("c" + std::to_string(c));
  auto a = eval::make_report(eval::confusion_matrix(preds, labels, 16), names);

  std::vector<std::size_t> perm(preds.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<int> p2, l2;
  for (std::size_t i : perm) {
    p2.push_back(preds[i]);
    l2.push_back(labels[i]);
  }
  auto b = eval::make_report(eval::confusion_matrix(p2, l2, 16), names);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("latency stats and flop estimates") {
  SUBCASE("percentiles are ordered") {
    Rng rng(51);
    std::vector<double> ms;
    for (int i = 0; i < 137; ++i) ms.push_back(rng.uniform(1.0, 40.0));
    auto s = eval::latency_stats(ms);
    CHECK(s.p50_ms <= s.p95_ms);
    CHECK(s.p95_ms <= s.max_ms);
    CHECK(s.frames == 137);
  }

  SUBCASE("GAP flop estimate is linear in the batch size") {
    nn::ModelGraph g = nn::build_micro_mobilenet_graph(0.25, 16, {3, 64, 96});
    nn::Plan plan = nn::compile(g);
    auto f1 = nn::flop_estimate(plan, 1);
    auto f2 = nn::flop_estimate(plan, 2);
    REQUIRE(f1.size() == f2.size());
    bool saw_gap = false;
    for (std::size_t i = 0; i < f1.size(); ++i) {
      CHECK(f2[i].second == 2 * f1[i].second);
      if (f1[i].first == "gap") {
        saw_gap = true;
        CHECK(f1[i].second > 0);
      }
    }
    CHECK(saw_gap);
  }
}
