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

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "rd/countermeasure.hpp"

using namespace rd;

namespace {

// Two separable vector populations: spoof leans negative on even dims,
// bona fide positive.
std::vector<VecF> toy_vectors(Rng& rng, int n, int dim,
                              std::vector<float>* targets) {
  std::vector<VecF> out;
  for (int i = 0; i < n; ++i) {
    const bool bona = i % 2 == 0;
    VecF v(dim);
    for (int j = 0; j < dim; ++j) {
      float base = static_cast<float>(0.3 * rng.normal());
      if (j % 2 == 0) base += bona ? 0.8f : -0.8f;
      v[j] = base;
    }
    out.push_back(v);
    if (targets)
      targets->push_back(bona ? cm::kBonaFideTarget : cm::kSpoofTarget);
  }
  return out;
}

}  // namespace

TEST_CASE("network geometry: three conv/pool stages onto one tanh unit") {
  cm::CmModelConfig cfg;
  auto net = cm::build_cm(cfg, 3);
  // noise, bn, 3x(conv,pool), flatten, dense, tanh = 11 layers.
  CHECK(net->n_layers() == 11);
  CHECK(net->layer(0).kind() == nnet::LayerKind::kGaussianNoise);
  CHECK(net->layer(1).kind() == nnet::LayerKind::kBatchNorm);
  CHECK(net->layer(2).kind() == nnet::LayerKind::kConv1d);
  CHECK(net->layer(3).kind() == nnet::LayerKind::kMaxPool1d);
  CHECK(net->layer(8).kind() == nnet::LayerKind::kFlatten);
  CHECK(net->layer(10).kind() == nnet::LayerKind::kTanh);

  // 410 -> pool 205 -> 102 -> 51; flatten = 51 * 32 = 1632 inputs to the
  // dense head.  Parameter count pins the arithmetic.
  std::size_t dense_params = 0;
  for (auto* p : net->params()) {
    if (p->value.rows() == 1632) dense_params = p->value.size();
  }
  CHECK(dense_params == 1632);

  SUBCASE("a 400-length variant flattens to 1600") {
    cm::CmModelConfig c2;
    c2.input_length = 400;
    auto n2 = cm::build_cm(c2, 3);
    bool found = false;
    for (auto* p : n2->params()) found = found || p->value.rows() == 1600;
    CHECK(found);
  }

  SUBCASE("without the noise layer the stack shrinks by one") {
    cm::CmModelConfig c3;
    c3.noise_layer = false;
    auto n3 = cm::build_cm(c3, 3);
    CHECK(n3->n_layers() == 10);
    CHECK(n3->layer(0).kind() == nnet::LayerKind::kBatchNorm);
  }

  SUBCASE("the minimum viable input is eight samples: 8 -> 4 -> 2 -> 1") {
    cm::CmModelConfig c4;
    c4.input_length = 8;
    CHECK_NOTHROW(cm::build_cm(c4, 3));
    c4.input_length = 7;
    CHECK_THROWS_AS(cm::build_cm(c4, 3), UsageError);
  }
}

TEST_CASE("scores live in (-1, 1) and match batch scoring") {
  cm::CmModelConfig cfg;
  cfg.input_length = 16;
  auto net = cm::build_cm(cfg, 5);
  Rng rng(5);
  std::vector<VecF> vecs = toy_vectors(rng, 8, 16, nullptr);
  auto batch = cm::score_batch(*net, vecs);
  REQUIRE(batch.size() == 8);
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    const double s = cm::score(*net, vecs[i]);
    CHECK(s == batch[i]);
    CHECK(s > -1.0);
    CHECK(s < 1.0);
  }
  CHECK(cm::score(*net, vecs[0]) == cm::score(*net, vecs[0]));  // pure

  CHECK_THROWS_AS(cm::score(*net, VecF::Zero(15)), DataError);
}

TEST_CASE("training separates an easy spoof/bona toy set") {
  Rng rng(6);
  std::vector<float> targets;
  std::vector<VecF> vecs = toy_vectors(rng, 80, 16, &targets);

  cm::CmModelConfig cfg;
  cfg.input_length = 16;
  cfg.conv_filters = 8;
  auto net = cm::build_cm(cfg, 7);

  nnet::TrainConfig<float> tc;
  tc.max_epochs = 120;
  tc.patience = 120;
  tc.batch_size = 16;
  tc.learning_rate = 0.01;
  tc.seed = 8;
  auto result = cm::train_cm(*net, vecs, targets, tc);
  CHECK(result.history.size() >= 1);
  CHECK(result.best_val_loss < 0.5);

  // Orientation: scores correlate positively with the +-1 targets, i.e.
  // bona fide scores sit above spoof scores.
  auto scores = cm::score_batch(*net, vecs);
  std::vector<double> t(targets.begin(), targets.end());
  CHECK(oracle::spearman(scores, t) > 0.9);

  double mean_bona = 0, mean_spoof = 0;
  int nb = 0, ns = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (targets[i] > 0) {
      mean_bona += scores[i];
      ++nb;
    } else {
      mean_spoof += scores[i];
      ++ns;
    }
  }
  CHECK(mean_bona / nb > 0.3);
  CHECK(mean_spoof / ns < -0.3);
}

TEST_CASE("training rejects malformed inputs") {
  cm::CmModelConfig cfg;
  cfg.input_length = 8;
  auto net = cm::build_cm(cfg, 1);
  nnet::TrainConfig<float> tc;

  std::vector<VecF> vecs = {VecF::Ones(8), VecF::Ones(8)};
  CHECK_THROWS_AS(cm::train_cm(*net, vecs, {1.0f}, tc), DataError);
  CHECK_THROWS_AS(cm::train_cm(*net, vecs, {1.0f, 0.5f}, tc), DataError);
  CHECK_THROWS_AS(cm::train_cm(*net, {}, {}, tc), DataError);
}

TEST_CASE("a zero-std noise layer trains identically to no layer at all") {
  Rng rng(9);
  std::vector<float> targets;
  std::vector<VecF> vecs = toy_vectors(rng, 32, 12, &targets);

  cm::CmModelConfig with_noise;
  with_noise.input_length = 12;
  with_noise.conv_filters = 4;
  with_noise.noise_std = 0.0;

  cm::CmModelConfig without = with_noise;
  without.noise_layer = false;

  auto na = cm::build_cm(with_noise, 77);
  auto nb = cm::build_cm(without, 77);

  nnet::TrainConfig<float> tc;
  tc.max_epochs = 5;
  tc.patience = 10;
  tc.batch_size = 8;
  tc.seed = 13;
  auto ra = cm::train_cm(*na, vecs, targets, tc);
  auto rb = cm::train_cm(*nb, vecs, targets, tc);

  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i)
    CHECK(ra.history[i].val_loss == rb.history[i].val_loss);
  Rng probe(14);
  std::vector<VecF> fresh = toy_vectors(probe, 4, 12, nullptr);
  for (const auto& v : fresh) CHECK(cm::score(*na, v) == cm::score(*nb, v));
}

TEST_CASE("the noise layer perturbs training but not inference") {
  cm::CmModelConfig cfg;
  cfg.input_length = 12;
  cfg.conv_filters = 4;
  cfg.noise_std = 0.5;
  auto net = cm::build_cm(cfg, 21);

  Rng rng(22);
  VecF v(12);
  for (int i = 0; i < 12; ++i) v[i] = static_cast<float>(rng.normal());

  // Inference is noise-free and repeatable even with a large noise std.
  const double s1 = cm::score(*net, v);
  const double s2 = cm::score(*net, v);
  CHECK(s1 == s2);

  // Train-mode forwards see the noise: two passes differ.
  nnet::Batch<float> b;
  b.data = v;  // 12 frames x 1 channel
  b.starts = {0, 12};
  auto t1 = net->forward(b, nnet::Mode::kTrain);
  auto t2 = net->forward(b, nnet::Mode::kTrain);
  CHECK(t1.data(0, 0) != t2.data(0, 0));
}
