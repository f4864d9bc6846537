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

#include "rd/countermeasure.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace rd::cm {
namespace {

// One vector becomes a length-L single-channel sequence (L rows x 1 column),
// so conv1d/max_pool slide along the feature axis.
MatF as_sequence(const VecF& v) {
  MatF m(v.size(), 1);
  m.col(0) = v;
  return m;
}

}  // namespace

std::unique_ptr<nnet::Network<float>> build_cm(const CmModelConfig& cfg,
                                               std::uint64_t seed) {
  if (cfg.input_length < 8) {
    throw UsageError("countermeasure input length must be at least 8, got " +
                     std::to_string(cfg.input_length));
  }
  if (cfg.conv_filters < 1 || cfg.conv_kernel < 1) {
    throw UsageError("countermeasure conv filters and kernel must be positive");
  }
  auto net = std::make_unique<nnet::Network<float>>(seed);
  if (cfg.noise_layer) net->gaussian_noise(cfg.noise_std);
  net->batch_norm();
  for (int block = 0; block < 3; ++block) {
    net->conv1d(cfg.conv_filters, cfg.conv_kernel, cfg.l2);
    net->max_pool1d(cfg.pool, cfg.stride);
  }
  net->flatten().dense(1).tanh();
  net->build({1, cfg.input_length});
  return net;
}

nnet::TrainResult train_cm(nnet::Network<float>& net,
                           const std::vector<VecF>& vectors,
                           const std::vector<float>& targets,
                           nnet::TrainConfig<float> cfg) {
  if (vectors.empty()) throw DataError("countermeasure training set is empty");
  if (targets.size() != vectors.size()) {
    throw DataError("countermeasure targets count (" +
                    std::to_string(targets.size()) +
                    ") does not match vector count (" +
                    std::to_string(vectors.size()) + ")");
  }
  const Eigen::Index len = vectors.front().size();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != len) {
      throw DataError("countermeasure vectors must share one length; vector " +
                      std::to_string(i) + " has " +
                      std::to_string(vectors[i].size()) + " values, expected " +
                      std::to_string(len));
    }
    if (targets[i] != kSpoofTarget && targets[i] != kBonaFideTarget) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%g", static_cast<double>(targets[i]));
      throw DataError(std::string("countermeasure target must be -1 or +1, "
                                  "got ") +
                      buf + " at index " + std::to_string(i));
    }
  }

  nnet::Dataset<float> data;
  data.inputs.reserve(vectors.size());
  for (const VecF& v : vectors) data.inputs.push_back(as_sequence(v));
  data.targets.resize(static_cast<Eigen::Index>(targets.size()), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    data.targets(static_cast<Eigen::Index>(i), 0) = targets[i];
  }

  cfg.loss = nnet::LossKind::kMse;
  return nnet::train(net, data, cfg);
}

double score(nnet::Network<float>& net, const VecF& v) {
  if (!net.built()) throw UsageError("countermeasure network is not built");
  const nnet::Shape in = net.input_shape();
  if (!in.time || v.size() != *in.time) {
    throw DataError("countermeasure score: vector length " +
                    std::to_string(v.size()) + " does not match model input " +
                    (in.time ? std::to_string(*in.time) : std::string("?")));
  }
  auto batch = nnet::Batch<float>::from_matrices({as_sequence(v)});
  auto out = net.forward(batch, nnet::Mode::kInfer);
  return static_cast<double>(out.data(0, 0));
}

std::vector<double> score_batch(nnet::Network<float>& net,
                                const std::vector<VecF>& vectors) {
  std::vector<double> scores;
  scores.reserve(vectors.size());
  for (const VecF& v : vectors) scores.push_back(score(net, v));
  return scores;
}

}  // namespace rd::cm
