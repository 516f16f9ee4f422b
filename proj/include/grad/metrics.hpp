#pragma once

// Evaluation measures for frame-wise sequence labeling: frame accuracy,
// segmental edit score, and overall / per-class precision-recall-F1.
// All values are percentages in [0, 100]. Pure functions.

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace grad::metrics {

struct MetricsError : std::runtime_error {
  explicit MetricsError(const std::string& m) : std::runtime_error(m) {}
};

struct Segment {
  int label;
  int64_t length;
};

// Run-length encoding; adjacent segments always carry distinct labels.
inline std::vector<Segment> rle(const std::vector<int>& labels) {
  std::vector<Segment> segs;
  for (int l : labels) {
    if (!segs.empty() && segs.back().label == l)
      ++segs.back().length;
    else
      segs.push_back({l, 1});
  }
  return segs;
}

inline double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw MetricsError("frame_accuracy: length mismatch " + std::to_string(pred.size()) + " vs " +
                       std::to_string(truth.size()));
  if (pred.empty()) throw MetricsError("frame_accuracy: empty input");
  int64_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return 100.0 * double(hits) / double(pred.size());
}

// Levenshtein distance over segment label sequences, unit costs.
inline int64_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = int64_t(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = int64_t(i);
    for (size_t j = 1; j <= m; ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[m];
}

// 100 * (1 - Levenshtein(S, S') / max(|S|, |S'|)) over run-length segments.
inline double edit_score(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.empty() || truth.empty()) throw MetricsError("edit_score: empty input");
  std::vector<int> sp, st;
  for (const Segment& s : rle(pred)) sp.push_back(s.label);
  for (const Segment& s : rle(truth)) st.push_back(s.label);
  const double dist = double(levenshtein(sp, st));
  const double norm = double(std::max(sp.size(), st.size()));
  return 100.0 * (1.0 - dist / norm);
}

struct ClassPRF {
  double precision = 0, recall = 0, f1 = 0;
  int64_t support = 0;
  bool zero_pred = false;   // no predicted positives; precision reported as 0
  bool zero_truth = false;  // class absent from truth; excluded from averages
};

struct MetricsReport {
  double acc = 0, edit = 0;
  double op = 0, or_ = 0, of1 = 0;  // support-weighted averages
  double cp = 0, cr = 0, cf1 = 0;   // unweighted per-class averages
  std::map<int, ClassPRF> per_class;
};

namespace detail {

inline double harmonic(double p, double r) { return (p + r) > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace detail

// One-vs-rest P/R/F1 pooled over frames. Classes absent from the truth are
// flagged and excluded from both the weighted and unweighted averages.
inline MetricsReport prf(const std::vector<int>& pred, const std::vector<int>& truth,
                         int num_classes) {
  if (pred.size() != truth.size())
    throw MetricsError("prf: length mismatch " + std::to_string(pred.size()) + " vs " +
                       std::to_string(truth.size()));
  std::vector<int64_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0),
      support(num_classes, 0);
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= num_classes || truth[i] < 0 || truth[i] >= num_classes)
      throw MetricsError("prf: label out of range");
    ++support[truth[i]];
    if (pred[i] == truth[i])
      ++tp[pred[i]];
    else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  MetricsReport rep;
  double wp = 0, wr = 0, wf = 0, sp = 0, sr = 0, sf = 0;
  int64_t total_support = 0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    ClassPRF e;
    e.support = support[c];
    e.zero_truth = support[c] == 0;
    e.zero_pred = (tp[c] + fp[c]) == 0;
    e.precision = e.zero_pred ? 0.0 : 100.0 * double(tp[c]) / double(tp[c] + fp[c]);
    e.recall = e.zero_truth ? 0.0 : 100.0 * double(tp[c]) / double(tp[c] + fn[c]);
    e.f1 = detail::harmonic(e.precision, e.recall);
    rep.per_class[c] = e;
    if (!e.zero_truth) {
      ++present;
      total_support += e.support;
      wp += e.precision * double(e.support);
      wr += e.recall * double(e.support);
      wf += e.f1 * double(e.support);
      sp += e.precision;
      sr += e.recall;
      sf += e.f1;
    }
  }
  if (present > 0 && total_support > 0) {
    rep.op = wp / double(total_support);
    rep.or_ = wr / double(total_support);
    rep.of1 = detail::harmonic(rep.op, rep.or_);
    rep.cp = sp / present;
    rep.cr = sr / present;
    rep.cf1 = sf / present;
  }
  return rep;
}

inline MetricsReport evaluate_sequence(const std::vector<int>& pred,
                                       const std::vector<int>& truth, int num_classes) {
  MetricsReport rep = prf(pred, truth, num_classes);
  rep.acc = frame_accuracy(pred, truth);
  rep.edit = edit_score(pred, truth);
  return rep;
}

// Per-sequence reports averaged over sequences.
inline MetricsReport average(const std::vector<MetricsReport>& reports) {
  MetricsReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.acc += r.acc;
    m.edit += r.edit;
    m.op += r.op;
    m.or_ += r.or_;
    m.of1 += r.of1;
    m.cp += r.cp;
    m.cr += r.cr;
    m.cf1 += r.cf1;
  }
  const double n = double(reports.size());
  m.acc /= n;
  m.edit /= n;
  m.op /= n;
  m.or_ /= n;
  m.of1 /= n;
  m.cp /= n;
  m.cr /= n;
  m.cf1 /= n;
  return m;
}

inline std::string csv_header() { return "run,corruption,severity,acc,edit,op,or,of1,cp,cr,cf1"; }

inline std::string csv_row(const std::string& run, const std::string& corruption, int severity,
                           const MetricsReport& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", run.c_str(),
                corruption.c_str(), severity, m.acc, m.edit, m.op, m.or_, m.of1, m.cp, m.cr,
                m.cf1);
  return buf;
}

}  // namespace grad::metrics
