// Copyright 2026 The replaydet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rd::metrics {
namespace {

void check_scores(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw DataError(std::string("no ") + what + " scores");
  for (double s : v)
    if (!std::isfinite(s))
      throw NumericError(std::string("non-finite ") + what + " score");
}

std::vector<double> sorted_copy(const std::vector<double>& v) {
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  return s;
}

// Fraction of sorted values >= t.
double frac_at_or_above(const std::vector<double>& sorted, double t) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
  return static_cast<double>(sorted.end() - it) / sorted.size();
}

// Fraction of sorted values < t.
double frac_below(const std::vector<double>& sorted, double t) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
  return static_cast<double>(it - sorted.begin()) / sorted.size();
}

std::vector<double> distinct_thresholds(const std::vector<double>& pos,
                                        const std::vector<double>& neg) {
  std::vector<double> t;
  t.reserve(pos.size() + neg.size());
  t.insert(t.end(), pos.begin(), pos.end());
  t.insert(t.end(), neg.begin(), neg.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

}  // namespace

std::vector<DetPoint> det_curve(const std::vector<double>& positive,
                                const std::vector<double>& negative) {
  check_scores(positive, "bona fide");
  check_scores(negative, "spoof");
  const std::vector<double> pos = sorted_copy(positive);
  const std::vector<double> neg = sorted_copy(negative);
  std::vector<double> thresholds = distinct_thresholds(pos, neg);

  std::vector<DetPoint> det;
  det.reserve(thresholds.size() + 1);
  for (double t : thresholds)
    det.push_back({t, frac_at_or_above(neg, t), frac_below(pos, t)});
  // Reject-all sentinel above every score.
  det.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  return det;
}

EerResult eer(const std::vector<double>& positive,
              const std::vector<double>& negative) {
  const std::vector<DetPoint> det = det_curve(positive, negative);

  // FAR starts at 1 (accept everything) and falls; FRR starts at 0 and
  // rises.  The sentinel guarantees a sign change.
  for (std::size_t i = 0; i < det.size(); ++i) {
    if (det[i].frr >= det[i].far) {
      if (i == 0 || det[i].frr == det[i].far)
        return {det[i].far, det[i].threshold};
      const DetPoint& a = det[i - 1];
      const DetPoint& b = det[i];
      const double gap_a = a.far - a.frr;          // > 0
      const double gap_b = b.frr - b.far;          // >= 0
      const double alpha = gap_a / (gap_a + gap_b);
      const double value = a.far + alpha * (b.far - a.far);
      double thr = a.threshold;
      if (std::isfinite(b.threshold))
        thr = a.threshold + alpha * (b.threshold - a.threshold);
      return {value, thr};
    }
  }
  throw NumericError("equal error crossing not found");  // unreachable
}

TdcfResult min_tdcf(const std::vector<double>& bona_fide,
                    const std::vector<double>& spoof, const TdcfParams& p) {
  const double c1 = p.p_tar * (p.c_miss_cm - p.c_miss_asv * p.p_miss_asv) -
                    p.p_non * p.c_fa_asv * p.p_fa_asv;
  const double c2 = p.c_fa_cm * p.p_spoof * (1.0 - p.p_miss_spoof_asv);
  if (c1 <= 0 || c2 <= 0)
    throw DataError("degenerate tandem cost parameters (C1=" +
                    std::to_string(c1) + ", C2=" + std::to_string(c2) + ")");
  const double norm = std::min(c1, c2);

  const std::vector<DetPoint> det = det_curve(bona_fide, spoof);
  // Accept-all point below every score; P_miss = 0, P_fa = 1.
  double best = c2 / norm;
  double best_thr = -std::numeric_limits<double>::infinity();
  for (const DetPoint& d : det) {
    const double cost = (c1 * d.frr + c2 * d.far) / norm;
    if (cost < best) {
      best = cost;
      best_thr = d.threshold;
    }
  }
  return {best, best_thr};
}

AsvOperatingPoint asv_operating_point(const AsvScores& scores) {
  check_scores(scores.target, "target");
  check_scores(scores.nontarget, "non-target");
  check_scores(scores.spoof, "spoof");

  const EerResult e = eer(scores.target, scores.nontarget);
  const std::vector<double> tar = sorted_copy(scores.target);
  const std::vector<double> non = sorted_copy(scores.nontarget);
  const std::vector<double> spf = sorted_copy(scores.spoof);

  AsvOperatingPoint op;
  op.threshold = e.threshold;
  op.p_miss_asv = frac_below(tar, e.threshold);
  op.p_fa_asv = frac_at_or_above(non, e.threshold);
  op.p_miss_spoof_asv = frac_below(spf, e.threshold);
  return op;
}

ConfusionResult accuracy_and_confusion(const std::vector<int>& predicted,
                                       const std::vector<int>& reference,
                                       int n_classes) {
  if (predicted.size() != reference.size())
    throw DataError("prediction/reference length mismatch");
  if (predicted.empty()) throw DataError("no classification trials");

  ConfusionResult r;
  r.counts = Eigen::MatrixXi::Zero(n_classes, n_classes);
  int correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i], t = reference[i];
    if (p < 0 || p >= n_classes || t < 0 || t >= n_classes)
      throw DataError("class index out of range");
    r.counts(t, p) += 1;
    if (p == t) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / predicted.size();
  return r;
}

}  // namespace rd::metrics
