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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "rd/nnet.hpp"
#include "rd/nnet_io.hpp"
#include "rd/nnet_train.hpp"

using namespace rd;
using nnet::Batch;
using nnet::Mode;
using nnet::Network;

namespace {

// Loss used by the finite-difference checks: MSE + weight decay, with the
// network's private random stream pinned so noise layers draw identically
// on every evaluation.
double eval_loss(Network<double>& net, const Batch<double>& in,
                 const MatD& targets, std::uint64_t s) {
  net.reseed(s);
  Batch<double> out = net.forward(in, Mode::kTrain);
  return nnet::detail::mse_loss<double>(out, targets, nullptr) +
         net.reg_loss();
}

// Worst error normalized by the usual combined tolerance: an entry passes
// when |analytic - fd| <= atol + rtol * max(|analytic|, |fd|), so a ratio
// below 1 means every entry passed.  A pure relative measure would explode
// on entries whose true gradient is zero, where central differences return
// only roundoff noise.
constexpr double kFdAtol = 1e-6;
constexpr double kFdRtol = 1e-4;

struct FdReport {
  double max_ratio = 0;
  int n_entries = 0;
};

// Central finite differences over every parameter entry vs the analytic
// gradient from one backward pass.
FdReport fd_check(Network<double>& net, const Batch<double>& in,
                  const MatD& targets, std::uint64_t s) {
  net.reseed(s);
  Batch<double> out = net.forward(in, Mode::kTrain);
  Batch<double> g;
  nnet::detail::mse_loss(out, targets, &g);
  net.zero_grads();
  net.backward(g);

  std::vector<MatD> analytic;
  for (auto* p : net.params()) analytic.push_back(p->grad);

  const double eps = 1e-5;
  FdReport rep;
  auto params = net.params();
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    MatD& val = params[pi]->value;
    for (Eigen::Index r = 0; r < val.rows(); ++r) {
      for (Eigen::Index c = 0; c < val.cols(); ++c) {
        const double orig = val(r, c);
        val(r, c) = orig + eps;
        const double lp = eval_loss(net, in, targets, s);
        val(r, c) = orig - eps;
        const double lm = eval_loss(net, in, targets, s);
        val(r, c) = orig;
        const double fd = (lp - lm) / (2 * eps);
        const double ga = analytic[pi](r, c);
        const double allowed =
            kFdAtol + kFdRtol * std::max(std::abs(ga), std::abs(fd));
        rep.max_ratio = std::max(rep.max_ratio, std::abs(ga - fd) / allowed);
        ++rep.n_entries;
      }
    }
  }
  return rep;
}

Batch<double> random_batch(Rng& rng, const std::vector<int>& times, int ch) {
  std::vector<Mat<double>> mats;
  for (int t : times) {
    MatD m(t, ch);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = rng.normal();
    mats.push_back(m);
  }
  return Batch<double>::from_matrices(mats);
}

MatD random_targets(Rng& rng, int rows, int cols) {
  MatD t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("gradients: dense / relu / tanh stack") {
  Network<double> net(11);
  net.dense(4, 0.01).relu().dense(2).tanh();
  net.build({3, 1});
  Rng rng(1);
  auto in = random_batch(rng, std::vector<int>(5, 1), 3);
  auto targets = random_targets(rng, 5, 2);
  auto rep = fd_check(net, in, targets, 99);
  CHECK(rep.n_entries > 0);
  CHECK(rep.max_ratio < 1.0);
}

TEST_CASE("gradients: conv1d / max_pool / flatten") {
  Network<double> net(12);
  net.conv1d(3, 3, 0.02).relu().max_pool1d(2, 2).conv1d(2, 2).flatten().dense(2);
  net.build({2, 6});
  Rng rng(2);
  auto in = random_batch(rng, std::vector<int>(4, 6), 2);
  auto targets = random_targets(rng, 4, 2);
  auto rep = fd_check(net, in, targets, 98);
  CHECK(rep.max_ratio < 1.0);
}

TEST_CASE("gradients: tdnn / stats_pool over variable-length samples") {
  Network<double> net(13);
  net.tdnn(4, {-1, 0, 2}, 0.005).relu().tdnn(3, {0}).stats_pool().dense(2);
  net.build({3, std::nullopt});
  Rng rng(3);
  auto in = random_batch(rng, {6, 8, 7}, 3);
  auto targets = random_targets(rng, 3, 2);
  auto rep = fd_check(net, in, targets, 97);
  CHECK(rep.max_ratio < 1.0);
}

TEST_CASE("gradients: gaussian_noise / batch_norm") {
  Network<double> net(14);
  net.gaussian_noise(0.1).batch_norm().dense(3).batch_norm().tanh().dense(1);
  net.build({4, 1});
  Rng rng(4);
  auto in = random_batch(rng, std::vector<int>(6, 1), 4);
  auto targets = random_targets(rng, 6, 1);
  auto rep = fd_check(net, in, targets, 96);
  CHECK(rep.max_ratio < 1.0);
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
  Rng rng(5);
  Batch<double> logits;
  logits.data = random_targets(rng, 4, 3);
  logits.starts = {0, 1, 2, 3, 4};
  std::vector<int> labels = {0, 2, 1, 2};

  Batch<double> grad;
  double acc = 0;
  nnet::detail::softmax_ce_loss(logits, labels, &grad, &acc);

  const double eps = 1e-6;
  for (Eigen::Index r = 0; r < logits.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < logits.data.cols(); ++c) {
      Batch<double> lp = logits, lm = logits;
      lp.data(r, c) += eps;
      lm.data(r, c) -= eps;
      const double fp = nnet::detail::softmax_ce_loss<double>(lp, labels,
                                                              nullptr, nullptr);
      const double fm = nnet::detail::softmax_ce_loss<double>(lm, labels,
                                                              nullptr, nullptr);
      CHECK(grad.data(r, c) == doctest::Approx((fp - fm) / (2 * eps))
                                   .epsilon(1e-5));
    }
  }
}

TEST_CASE("batch_norm normalizes to zero mean, unit biased variance") {
  Network<float> net(21);
  net.batch_norm();
  net.build({3, 1});
  Rng rng(21);
  Batch<float> in;
  in.data.resize(64, 3);
  for (Eigen::Index i = 0; i < in.data.size(); ++i)
    in.data.data()[i] = static_cast<float>(3.0 * rng.normal() + 2.0);
  in.starts.resize(65);
  for (int i = 0; i <= 64; ++i) in.starts[i] = i;

  auto out = net.forward(in, Mode::kTrain);
  for (int c = 0; c < 3; ++c) {
    const double mean = out.data.col(c).cast<double>().mean();
    const double var =
        out.data.col(c).cast<double>().array().square().mean() - mean * mean;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }

  // Running statistics converge to the (repeated) batch statistics, so
  // inference output approaches the train-mode output.
  for (int i = 0; i < 300; ++i) net.forward(in, Mode::kTrain);
  auto inf = net.forward(in, Mode::kInfer);
  CHECK((inf.data - out.data).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("max_pool keeps the earliest row on ties") {
  nnet::MaxPool1dLayer<float> pool(2, 2);
  pool.build({1, std::nullopt});
  Batch<float> in;
  in.data.resize(2, 1);
  in.data << 5.0f, 5.0f;
  in.starts = {0, 2};
  Batch<float> out;
  Rng rng(0);
  pool.forward(in, out, Mode::kTrain, rng);
  CHECK(out.data(0, 0) == 5.0f);

  Batch<float> gout = out, gin;
  gout.data(0, 0) = 1.0f;
  pool.backward(gout, gin);
  CHECK(gin.data(0, 0) == 1.0f);  // first of the tied rows wins
  CHECK(gin.data(1, 0) == 0.0f);
}

TEST_CASE("zero-std noise layer leaves the training trajectory bitwise intact") {
  auto make_data = [] {
    nnet::Dataset<float> d;
    Rng rng(7);
    for (int i = 0; i < 24; ++i) {
      MatF x(1, 4);
      for (int j = 0; j < 4; ++j) x(0, j) = static_cast<float>(rng.normal());
      d.inputs.push_back(x);
    }
    d.targets.resize(24, 1);
    for (int i = 0; i < 24; ++i)
      d.targets(i, 0) = d.inputs[static_cast<std::size_t>(i)](0, 0) > 0 ? 1.0f
                                                                        : -1.0f;
    return d;
  };

  nnet::TrainConfig<float> cfg;
  cfg.max_epochs = 3;
  cfg.patience = 10;
  cfg.batch_size = 8;
  cfg.seed = 5;

  Network<float> with_noise(31), without(31);
  with_noise.gaussian_noise(0.0).batch_norm().dense(3).tanh().dense(1);
  without.batch_norm().dense(3).tanh().dense(1);
  with_noise.build({4, 1});
  without.build({4, 1});

  auto data = make_data();
  auto ra = nnet::train(with_noise, data, cfg);
  auto rb = nnet::train(without, data, cfg);

  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
    CHECK(ra.history[i].val_loss == rb.history[i].val_loss);
  }
  auto ta = with_noise.tensors(), tb = without.tensors();
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(ta[i]->isApprox(*tb[i], 0));  // exact
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto run = [] {
    nnet::Dataset<float> d;
    Rng rng(70);
    for (int i = 0; i < 40; ++i) {
      MatF x(1, 3);
      for (int j = 0; j < 3; ++j) x(0, j) = static_cast<float>(rng.normal());
      d.inputs.push_back(x);
    }
    d.targets.resize(40, 1);
    for (int i = 0; i < 40; ++i)
      d.targets(i, 0) =
          std::tanh(d.inputs[static_cast<std::size_t>(i)].sum());
    nnet::TrainConfig<float> cfg;
    cfg.max_epochs = 5;
    cfg.seed = 42;
    Network<float> net(8);
    net.dense(5).relu().dense(1).tanh();
    net.build({3, 1});
    auto r = nnet::train(net, d, cfg);
    std::vector<double> sig;
    for (const auto& e : r.history) {
      sig.push_back(e.train_loss);
      sig.push_back(e.val_loss);
    }
    for (auto* t : net.tensors())
      for (Eigen::Index i = 0; i < t->size(); ++i)
        sig.push_back(static_cast<double>(t->data()[i]));
    return sig;
  };
  CHECK(run() == run());
}

TEST_CASE("weight decay shrinks weights") {
  auto final_norm = [](double l2) {
    nnet::Dataset<float> d;
    Rng rng(9);
    for (int i = 0; i < 32; ++i) {
      MatF x(1, 3);
      for (int j = 0; j < 3; ++j) x(0, j) = static_cast<float>(rng.normal());
      d.inputs.push_back(x);
    }
    d.targets = MatF::Zero(32, 2);
    nnet::TrainConfig<float> cfg;
    cfg.max_epochs = 20;
    cfg.patience = 50;
    cfg.seed = 1;
    Network<float> net(55);
    net.dense(4, l2).relu().dense(2, l2);
    net.build({3, 1});
    nnet::train(net, d, cfg);
    double norm = 0;
    for (auto* p : net.params()) norm += p->value.squaredNorm();
    return norm;
  };
  CHECK(final_norm(0.5) < final_norm(0.0));
}

TEST_CASE("early stopping: patience 0 stops at the first non-improvement") {
  // Constant targets and a tiny learning rate make validation loss flat
  // almost immediately.
  nnet::Dataset<float> d;
  Rng rng(10);
  for (int i = 0; i < 20; ++i) {
    MatF x(1, 2);
    x(0, 0) = static_cast<float>(rng.normal());
    x(0, 1) = static_cast<float>(rng.normal());
    d.inputs.push_back(x);
  }
  d.targets = MatF::Zero(20, 1);

  nnet::TrainConfig<float> cfg;
  cfg.max_epochs = 100;
  cfg.patience = 0;
  cfg.learning_rate = 0.0;  // nothing can improve
  cfg.seed = 3;

  Network<float> net(77);
  net.dense(1);
  net.build({2, 1});
  auto r = nnet::train(net, d, cfg);
  // Epoch 1 sets the best; epoch 2 cannot improve and training stops.
  CHECK(r.history.size() == 2);
  CHECK(r.best_epoch == 1);
}

TEST_CASE("early stopping restores the best snapshot") {
  nnet::Dataset<float> d;
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    MatF x(1, 3);
    for (int j = 0; j < 3; ++j) x(0, j) = static_cast<float>(rng.normal());
    d.inputs.push_back(x);
    }
  d.targets.resize(50, 1);
  for (int i = 0; i < 50; ++i)
    d.targets(i, 0) = d.inputs[static_cast<std::size_t>(i)](0, 1) > 0 ? 1.0f
                                                                      : -1.0f;
  nnet::TrainConfig<float> cfg;
  cfg.max_epochs = 30;
  cfg.patience = 2;
  cfg.learning_rate = 0.05;  // deliberately jumpy so val loss oscillates
  cfg.batch_size = 8;
  cfg.seed = 12;

  Network<float> net(78);
  net.dense(6).relu().dense(1).tanh();
  net.build({3, 1});
  auto r = nnet::train(net, d, cfg);

  // Recompute the validation loss of the restored network over the same
  // deterministic split the trainer used.
  const int n = d.n();
  int n_val = static_cast<int>(std::lround(cfg.val_fraction * n));
  n_val = std::clamp(n_val, 1, n - 1);
  Rng trng(derive_seed(cfg.seed, 0x7261696e));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  trng.shuffle(order);
  double loss = 0;
  int rows = 0;
  for (int i = n - n_val; i < n; ++i) {
    const int s = order[static_cast<std::size_t>(i)];
    auto out = net.forward(
        Batch<float>::from_matrices({d.inputs[static_cast<std::size_t>(s)]}),
        Mode::kInfer);
    MatF t = d.targets.row(s);
    loss += nnet::detail::mse_loss<float>(out, t, nullptr);
    ++rows;
  }
  loss /= rows;
  CHECK(loss == doctest::Approx(r.best_val_loss).epsilon(1e-6));
}

TEST_CASE("diverging training raises a numeric error naming a layer") {
  nnet::Dataset<float> d;
  Rng rng(13);
  for (int i = 0; i < 16; ++i) {
    MatF x(1, 2);
    x(0, 0) = static_cast<float>(1e3 * rng.normal());
    x(0, 1) = static_cast<float>(1e3 * rng.normal());
    d.inputs.push_back(x);
  }
  d.targets = MatF::Constant(16, 1, 1e6f);

  nnet::TrainConfig<float> cfg;
  cfg.max_epochs = 50;
  cfg.patience = 50;
  cfg.learning_rate = 1e12;
  cfg.seed = 14;

  Network<float> net(79);
  net.dense(4).dense(1);
  net.build({2, 1});
  CHECK_THROWS_AS(nnet::train(net, d, cfg), NumericError);
}

TEST_CASE("cross-entropy training separates a toy problem") {
  nnet::Dataset<float> d;
  Rng rng(15);
  for (int i = 0; i < 60; ++i) {
    const int label = i % 2;
    MatF x(1, 2);
    x(0, 0) = static_cast<float>(rng.normal() + (label ? 3.0 : -3.0));
    x(0, 1) = static_cast<float>(rng.normal());
    d.inputs.push_back(x);
    d.labels.push_back(label);
  }
  nnet::TrainConfig<float> cfg;
  cfg.loss = nnet::LossKind::kSoftmaxCrossEntropy;
  cfg.max_epochs = 40;
  cfg.patience = 40;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.05;
  cfg.seed = 16;

  Network<float> net(80);
  net.dense(8).relu().dense(2);
  net.build({2, 1});
  auto r = nnet::train(net, d, cfg);
  CHECK(r.best_val_accuracy == 1.0);
}

TEST_CASE("shape and usage errors carry layer context") {
  SUBCASE("dense on a time axis needs flatten or stats_pool") {
    Network<float> net(1);
    net.dense(2);
    CHECK_THROWS_WITH_AS(net.build({3, 5}),
                         doctest::Contains("flatten or stats_pool"),
                         DataError);
  }
  SUBCASE("flatten requires a fixed time axis") {
    Network<float> net(1);
    net.flatten();
    CHECK_THROWS_AS(net.build({3, std::nullopt}), DataError);
  }
  SUBCASE("tdnn contexts must strictly increase") {
    Network<float> net(1);
    CHECK_THROWS_AS(net.tdnn(4, {0, 0}), DataError);
  }
  SUBCASE("input channel mismatch is reported") {
    Network<float> net(1);
    net.dense(2);
    net.build({3, 1});
    Batch<float> in;
    in.data = MatF::Zero(1, 4);
    in.starts = {0, 1};
    CHECK_THROWS_AS(net.forward(in, Mode::kInfer), DataError);
  }
  SUBCASE("backward needs a preceding train-mode forward") {
    Network<float> net(1);
    net.dense(2);
    net.build({3, 1});
    Batch<float> in;
    in.data = MatF::Zero(1, 3);
    in.starts = {0, 1};
    auto out = net.forward(in, Mode::kInfer);
    CHECK_THROWS_AS(net.backward(out), DataError);
  }
  SUBCASE("stats_pool needs two frames per sample") {
    Network<float> net(1);
    net.stats_pool();
    net.build({2, std::nullopt});
    Batch<float> in;
    in.data = MatF::Zero(1, 2);
    in.starts = {0, 1};
    CHECK_THROWS_AS(net.forward(in, Mode::kInfer), DataError);
  }
}

TEST_CASE("checkpoint round trip preserves behavior bitwise") {
  Network<float> net(91);
  net.conv1d(3, 3, 0.001).relu().max_pool1d(2, 2).tdnn(4, {-1, 0, 1})
     .stats_pool().dense(2, 0.01).tanh();
  net.build({2, std::nullopt});

  Rng rng(92);
  Batch<float> in;
  in.data.resize(9, 2);
  for (Eigen::Index i = 0; i < in.data.size(); ++i)
    in.data.data()[i] = static_cast<float>(rng.normal());
  in.starts = {0, 9};
  auto before = net.forward(in, Mode::kInfer);

  const std::string path =
      (std::filesystem::temp_directory_path() / "rd_nnet_roundtrip.bin")
          .string();
  nnet::save_network(net, path, 0xabcdef12u);
  auto loaded = nnet::load_network<float>(path);
  CHECK(loaded.config_hash == 0xabcdef12u);
  REQUIRE(loaded.net->n_layers() == net.n_layers());
  for (int i = 0; i < net.n_layers(); ++i)
    CHECK(loaded.net->layer(i).kind() == net.layer(i).kind());

  auto after = loaded.net->forward(in, Mode::kInfer);
  CHECK(after.data.isApprox(before.data, 0));
  std::filesystem::remove(path);
}

TEST_CASE("embedding tap: forward_prefix equals truncated manual forward") {
  Network<float> net(93);
  net.tdnn(4, {-1, 0, 1}).relu().stats_pool().dense(3).relu().dense(2);
  net.build({2, std::nullopt});
  Rng rng(94);
  Batch<float> in;
  in.data.resize(7, 2);
  for (Eigen::Index i = 0; i < in.data.size(); ++i)
    in.data.data()[i] = static_cast<float>(rng.normal());
  in.starts = {0, 7};

  auto tap = net.forward_prefix(in, 4, Mode::kInfer);
  CHECK(tap.data.cols() == 3);
  auto full = net.forward(in, Mode::kInfer);
  CHECK(full.data.cols() == 2);
}
