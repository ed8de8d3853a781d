#ifndef WEEDPILOT_EVAL_METRICS_HPP
#define WEEDPILOT_EVAL_METRICS_HPP

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "weedpilot/core.hpp"

namespace weedpilot::eval {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void record(int truth, int predicted);
  long long at(int truth, int predicted) const;
  int num_classes() const { return n_; }
  long long total() const;
  long long row_sum(int truth) const;
  long long col_sum(int predicted) const;

  std::string to_csv() const;

 private:
  int n_;
  std::vector<long long> counts_;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& predictions,
                                 const std::vector<int>& labels, int num_classes);

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// precision = cm[s][s]/colsum, recall = cm[s][s]/rowsum,
// F1 = 2 pr/(p+r). Empty denominators yield 0 so the metric stays total.
Prf1 precision_recall_f1(const ConfusionMatrix& cm, int cls);

// Macro average of per-class recall; classes with no true samples are
// excluded (and counted in *excluded when given).
double avg_class_accuracy(const ConfusionMatrix& cm, int* excluded = nullptr);

// Fraction of the diagonal (micro accuracy).
double overall_accuracy(const ConfusionMatrix& cm);

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
  int frames = 0;
};

LatencyStats latency_stats(std::vector<double> samples_ms);

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<Prf1> per_class;
  double macro_avg_class_accuracy = 0.0;
  double overall_acc = 0.0;
  LatencyStats latency;          // zeroed when evaluation ran without timing
  bool latency_measured = false;
  long long parameter_count = 0;
  long long parameter_bytes = 0;
  long long peak_working_set_bytes = 0;
  long long samples = 0;

  nlohmann::json to_json() const;
  // Per-class F1 bars, one row per class (plot-friendly mirror of the report).
  std::string f1_csv() const;
};

EvalReport make_report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

}  // namespace weedpilot::eval

#endif
