#include "weedpilot/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace weedpilot::eval {

using json = nlohmann::json;

ConfusionMatrix::ConfusionMatrix(int num_classes) : n_(num_classes) {
  if (num_classes <= 0) throw Error("confusion matrix: need at least one class");
  counts_.assign(static_cast<std::size_t>(n_) * n_, 0);
}

void ConfusionMatrix::record(int truth, int predicted) {
  if (truth < 0 || truth >= n_ || predicted < 0 || predicted >= n_)
    throw Error("confusion matrix: class id out of range");
  counts_[static_cast<std::size_t>(truth) * n_ + predicted]++;
}

long long ConfusionMatrix::at(int truth, int predicted) const {
  return counts_[static_cast<std::size_t>(truth) * n_ + predicted];
}

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (long long v : counts_) t += v;
  return t;
}

long long ConfusionMatrix::row_sum(int truth) const {
  long long t = 0;
  for (int p = 0; p < n_; ++p) t += at(truth, p);
  return t;
}

long long ConfusionMatrix::col_sum(int predicted) const {
  long long t = 0;
  for (int r = 0; r < n_; ++r) t += at(r, predicted);
  return t;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  for (int r = 0; r < n_; ++r) {
    for (int c = 0; c < n_; ++c) out << (c ? "," : "") << at(r, c);
    out << "\n";
  }
  return out.str();
}

ConfusionMatrix confusion_matrix(const std::vector<int>& predictions,
                                 const std::vector<int>& labels, int num_classes) {
  if (predictions.size() != labels.size())
    throw Error("confusion matrix: predictions/labels length mismatch");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) cm.record(labels[i], predictions[i]);
  return cm;
}

Prf1 precision_recall_f1(const ConfusionMatrix& cm, int cls) {
  const long long tp = cm.at(cls, cls);
  const long long col = cm.col_sum(cls);
  const long long row = cm.row_sum(cls);
  Prf1 r;
  r.precision = col > 0 ? static_cast<double>(tp) / col : 0.0;
  r.recall = row > 0 ? static_cast<double>(tp) / row : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

double avg_class_accuracy(const ConfusionMatrix& cm, int* excluded) {
  double acc = 0.0;
  int used = 0, skipped = 0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const long long row = cm.row_sum(c);
    if (row == 0) {
      ++skipped;
      continue;
    }
    acc += static_cast<double>(cm.at(c, c)) / row;
    ++used;
  }
  if (excluded) *excluded = skipped;
  if (used == 0) throw Error("avg_class_accuracy: no class has true samples");
  return acc / used;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  const long long t = cm.total();
  if (t == 0) return 0.0;
  long long diag = 0;
  for (int c = 0; c < cm.num_classes(); ++c) diag += cm.at(c, c);
  return static_cast<double>(diag) / t;
}

LatencyStats latency_stats(std::vector<double> samples_ms) {
  if (samples_ms.empty()) throw Error("latency_stats: no samples");
  LatencyStats s;
  s.frames = static_cast<int>(samples_ms.size());
  double sum = 0;
  for (double v : samples_ms) sum += v;
  s.mean_ms = sum / s.frames;
  std::sort(samples_ms.begin(), samples_ms.end());
  auto rank = [&](double q) {
    // nearest-rank percentile on the sorted sample
    int i = static_cast<int>(std::ceil(q * s.frames)) - 1;
    return samples_ms[std::clamp(i, 0, s.frames - 1)];
  };
  s.p50_ms = rank(0.50);
  s.p95_ms = rank(0.95);
  s.max_ms = samples_ms.back();
  return s;
}

EvalReport make_report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != cm.num_classes())
    throw Error("make_report: class name count mismatch");
  EvalReport r;
  r.class_names = class_names;
  for (int c = 0; c < cm.num_classes(); ++c) r.per_class.push_back(precision_recall_f1(cm, c));
  r.macro_avg_class_accuracy = avg_class_accuracy(cm);
  r.overall_acc = overall_accuracy(cm);
  r.samples = cm.total();
  return r;
}

json EvalReport::to_json() const {
  json per = json::array();
  for (std::size_t c = 0; c < per_class.size(); ++c)
    per.push_back({{"class", class_names[c]},
                   {"precision", per_class[c].precision},
                   {"recall", per_class[c].recall},
                   {"f1", per_class[c].f1}});
  json j{{"per_class", per},
         {"macro_avg_class_accuracy", macro_avg_class_accuracy},
         {"overall_accuracy", overall_acc},
         {"samples", samples},
         {"parameter_count", parameter_count},
         {"parameter_bytes", parameter_bytes},
         {"peak_working_set_bytes", peak_working_set_bytes}};
  if (latency_measured)
    j["latency_ms"] = {{"mean", latency.mean_ms},
                       {"p50", latency.p50_ms},
                       {"p95", latency.p95_ms},
                       {"max", latency.max_ms},
                       {"frames", latency.frames}};
  else
    j["latency_ms"] = nullptr;
  return j;
}

std::string EvalReport::f1_csv() const {
  std::ostringstream out;
  out << "class,precision,recall,f1\n";
  char buf[128];
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n", class_names[c].c_str(),
                  per_class[c].precision, per_class[c].recall, per_class[c].f1);
    out << buf;
  }
  return out.str();
}

}  // namespace weedpilot::eval
