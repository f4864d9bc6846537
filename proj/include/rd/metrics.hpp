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

#pragma once

#include <vector>

#include "rd/common.hpp"

namespace rd::metrics {

// One point of the detection trade-off sweep.  Thresholds run over every
// distinct score in ascending order plus a final reject-all sentinel; a trial
// scoring exactly at the threshold counts as accepted.
//   far = fraction of negatives (spoof) with score >= threshold
//   frr = fraction of positives (bona fide) with score <  threshold
struct DetPoint {
  double threshold;
  double far;
  double frr;
};

std::vector<DetPoint> det_curve(const std::vector<double>& positive,
                                const std::vector<double>& negative);

struct EerResult {
  double eer;        // equal error rate in [0, 1]
  double threshold;  // interpolated threshold at the crossing
};

// Equal error rate at the FAR/FRR crossing, linearly interpolated between
// the two adjacent sweep points.  Both score lists must be non-empty.
// Strictly increasing transforms of the scores leave the result unchanged.
EerResult eer(const std::vector<double>& positive,
              const std::vector<double>& negative);

// Tandem detection cost parameters: class priors, detection costs, and the
// fixed operating point of the upstream speaker verifier.  The default
// priors and costs follow the published evaluation convention for replay
// scenarios (p_tar 0.9405 / p_non 0.0095 / p_spoof 0.05, asv costs 1 and 10,
// countermeasure costs 1 and 10).
struct TdcfParams {
  double p_tar = 0.9405;
  double p_non = 0.0095;
  double p_spoof = 0.05;
  double c_miss_asv = 1.0;
  double c_fa_asv = 10.0;
  double c_miss_cm = 1.0;
  double c_fa_cm = 10.0;
  // Verifier error rates at its fixed threshold.
  double p_miss_asv = 0.0;
  double p_fa_asv = 0.0;
  double p_miss_spoof_asv = 0.0;
};

struct TdcfResult {
  double min_tdcf;   // normalized, in [0, 1]
  double threshold;  // countermeasure threshold achieving the minimum
};

// Minimum normalized tandem detection cost over all countermeasure
// thresholds:
//   C1 = p_tar (c_miss_cm - c_miss_asv p_miss_asv) - p_non c_fa_asv p_fa_asv
//   C2 = c_fa_cm p_spoof (1 - p_miss_spoof_asv)
//   tDCF(t) = C1 P_miss_cm(t) + C2 P_fa_cm(t), normalized by min(C1, C2).
// Degenerate parameter combinations (C1 <= 0 or C2 <= 0) raise DataError.
TdcfResult min_tdcf(const std::vector<double>& bona_fide,
                    const std::vector<double>& spoof, const TdcfParams& p);

// Verifier scores split by trial class.
struct AsvScores {
  std::vector<double> target;
  std::vector<double> nontarget;
  std::vector<double> spoof;
};

struct AsvOperatingPoint {
  double threshold;          // target/non-target equal error threshold
  double p_miss_asv;         // targets below threshold
  double p_fa_asv;           // non-targets at or above threshold
  double p_miss_spoof_asv;   // spoof trials below threshold
};

// Fixes the verifier threshold at its target/non-target equal error point
// and counts the three error rates there.
AsvOperatingPoint asv_operating_point(const AsvScores& scores);

struct ConfusionResult {
  double accuracy;
  Eigen::MatrixXi counts;  // rows: reference class, cols: predicted class
};

ConfusionResult accuracy_and_confusion(const std::vector<int>& predicted,
                                       const std::vector<int>& reference,
                                       int n_classes);

}  // namespace rd::metrics
