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
//
// The replay countermeasure: a small 1-D CNN regressor over flattened
// feature vectors, trained with MSE toward -1 (spoof) / +1 (bona fide).
// Scores live in (-1, +1); higher means more likely genuine.

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "rd/common.hpp"
#include "rd/nnet.hpp"
#include "rd/nnet_train.hpp"

namespace rd::cm {

inline constexpr float kSpoofTarget = -1.0f;
inline constexpr float kBonaFideTarget = 1.0f;

struct CmModelConfig {
  double noise_std = 0.001;  // additive Gaussian noise during training
  bool noise_layer = true;   // false omits the layer entirely
  int conv_filters = 32;
  int conv_kernel = 3;
  int pool = 2;
  int stride = 2;
  double l2 = 1e-4;       // conv-weight decay
  int input_length = 410; // flattened feature vector length
};

// Fixed stack: [gaussian_noise] -> batch_norm -> 3 x (conv1d -> max_pool)
// -> flatten -> dense(1) -> tanh.  The convolutions are linear (the paper's
// stack puts no activation between conv and pool).  Needs input_length >= 8
// so three pool-by-2 stages stay valid.
std::unique_ptr<nnet::Network<float>> build_cm(const CmModelConfig& cfg,
                                               std::uint64_t seed);

// MSE training over equal-length vectors with targets in {-1, +1}.  The
// config's loss field is overridden to MSE.
nnet::TrainResult train_cm(nnet::Network<float>& net,
                           const std::vector<VecF>& vectors,
                           const std::vector<float>& targets,
                           nnet::TrainConfig<float> cfg);

// Deterministic inference score for one vector.
double score(nnet::Network<float>& net, const VecF& v);

// Scores a whole set in input order.
std::vector<double> score_batch(nnet::Network<float>& net,
                                const std::vector<VecF>& vectors);

}  // namespace rd::cm
