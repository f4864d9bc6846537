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
// Small feed-forward engine over Eigen dense matrices.  Activations travel
// as a Batch: the samples of a minibatch stacked row-wise with explicit
// sample boundaries, so variable-length frame sequences and fixed-length
// vectors share one code path.  Everything is templated on the scalar type;
// training runs in float, finite-difference checks instantiate double.

#pragma once

#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rd/common.hpp"

namespace rd::nnet {

enum class Mode { kTrain, kInfer };

enum class LayerKind {
  kDense,
  kConv1d,
  kTdnn,
  kBatchNorm,
  kRelu,
  kTanh,
  kGaussianNoise,
  kMaxPool1d,
  kStatsPool,
  kFlatten,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kTdnn: return "tdnn";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kTanh: return "tanh";
    case LayerKind::kGaussianNoise: return "gaussian_noise";
    case LayerKind::kMaxPool1d: return "max_pool1d";
    case LayerKind::kStatsPool: return "stats_pool";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

// Activation shape tracked through the symbolic build pass.  `time` is the
// per-sample row count when the graph fixes it; nullopt means it varies per
// sample (frame sequences).
struct Shape {
  int channels = 0;
  std::optional<int> time;
};

// Minibatch: samples stacked along rows.  starts has n_samples()+1 entries;
// sample i owns rows [starts[i], starts[i+1]).
template <typename Scalar>
struct Batch {
  Mat<Scalar> data;
  std::vector<int> starts{0};

  int n_samples() const { return static_cast<int>(starts.size()) - 1; }
  int rows(int i) const { return starts[i + 1] - starts[i]; }
  auto sample(int i) { return data.middleRows(starts[i], rows(i)); }
  auto sample(int i) const { return data.middleRows(starts[i], rows(i)); }

  static Batch zeros(const std::vector<int>& sample_rows, int channels) {
    Batch b;
    b.starts.resize(sample_rows.size() + 1);
    b.starts[0] = 0;
    for (std::size_t i = 0; i < sample_rows.size(); ++i)
      b.starts[i + 1] = b.starts[i] + sample_rows[i];
    b.data = Mat<Scalar>::Zero(b.starts.back(), channels);
    return b;
  }

  static Batch from_matrices(const std::vector<Mat<Scalar>>& samples) {
    if (samples.empty()) throw DataError("empty batch");
    std::vector<int> rows(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
      rows[i] = static_cast<int>(samples[i].rows());
    Batch b = zeros(rows, static_cast<int>(samples.front().cols()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].cols() != b.data.cols())
        throw DataError("batch samples disagree on channel count");
      b.sample(static_cast<int>(i)) = samples[i];
    }
    return b;
  }

  // One sample per vector, laid out as a (length x 1) column of "time".
  static Batch from_vectors(const std::vector<Vec<Scalar>>& vs) {
    if (vs.empty()) throw DataError("empty batch");
    std::vector<int> rows(vs.size(), static_cast<int>(vs.front().size()));
    Batch b = zeros(rows, 1);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (vs[i].size() != vs.front().size())
        throw DataError("batch vectors disagree on length");
      b.sample(static_cast<int>(i)).col(0) = vs[i];
    }
    return b;
  }

  bool all_finite() const { return data.allFinite(); }
};

// One trainable tensor plus its gradient; l2 > 0 marks weight decay.
template <typename Scalar>
struct Param {
  Mat<Scalar> value;
  Mat<Scalar> grad;
  double l2 = 0.0;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;

  // Resolves parameter shapes from the input shape and returns the output
  // shape.  Called once, before init().
  virtual Shape build(const Shape& in) = 0;
  virtual void init(Rng& rng) {}

  virtual void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
                       Rng& rng) = 0;
  // Consumes the gradient w.r.t. this layer's output; emits the gradient
  // w.r.t. its input.  Valid only after a kTrain forward.
  virtual void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) = 0;

  virtual void collect_params(std::vector<Param<Scalar>*>& out) {}
  // All tensors that define the layer's state (params + running buffers),
  // in serialization order.
  virtual void collect_tensors(std::vector<Mat<Scalar>*>& out) {
    std::vector<Param<Scalar>*> ps;
    collect_params(ps);
    for (auto* p : ps) out.push_back(&p->value);
  }

  virtual double reg_loss() const { return 0.0; }
  // Serialized one-line descriptor, parseable by the layer factory.
  virtual std::string spec() const { return layer_kind_name(kind()); }
};

// ---------------------------------------------------------------------------
// Layers

template <typename Scalar>
class DenseLayer : public Layer<Scalar> {
 public:
  DenseLayer(int units, double l2 = 0.0) : units_(units), l2_(l2) {
    if (units < 1) throw DataError("dense needs at least one unit");
  }

  LayerKind kind() const override { return LayerKind::kDense; }

  Shape build(const Shape& in) override {
    if (!in.time || *in.time != 1)
      throw DataError("dense expects exactly one row per sample; "
                      "insert flatten or stats_pool first");
    in_ch_ = in.channels;
    w_.value.setZero(in_ch_, units_);
    w_.grad.setZero(in_ch_, units_);
    w_.l2 = l2_;
    b_.value.setZero(1, units_);
    b_.grad.setZero(1, units_);
    return {units_, 1};
  }

  void init(Rng& rng) override {
    const double a = std::sqrt(3.0 / in_ch_);
    for (Eigen::Index j = 0; j < w_.value.cols(); ++j)
      for (Eigen::Index i = 0; i < w_.value.rows(); ++i)
        w_.value(i, j) = static_cast<Scalar>(rng.uniform(-a, a));
  }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng&) override {
    check_channels(in, in_ch_, "dense");
    out.starts = in.starts;
    out.data = in.data * w_.value;
    out.data.rowwise() += b_.value.row(0);
    if (mode == Mode::kTrain) cached_in_ = in.data;
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    w_.grad.noalias() += cached_in_.transpose() * gout.data;
    b_.grad.row(0) += gout.data.colwise().sum();
    gin.starts = gout.starts;
    gin.data.noalias() = gout.data * w_.value.transpose();
  }

  void collect_params(std::vector<Param<Scalar>*>& out) override {
    out.push_back(&w_);
    out.push_back(&b_);
  }

  double reg_loss() const override {
    return 0.5 * l2_ * static_cast<double>(w_.value.squaredNorm());
  }

  std::string spec() const override {
    return "dense units=" + std::to_string(units_) +
           " l2=" + detail::fmt_double(l2_);
  }

 private:
  static void check_channels(const Batch<Scalar>& in, int expect,
                             const char* who) {
    if (in.data.cols() != expect)
      throw DataError(std::string(who) + ": expected " +
                      std::to_string(expect) + " input channels, got " +
                      std::to_string(in.data.cols()));
  }

  int units_, in_ch_ = 0;
  double l2_;
  Param<Scalar> w_, b_;
  Mat<Scalar> cached_in_;
};

// 1-D convolution over the time axis, zero-padded so each sample keeps its
// row count ("same" padding).  Weights for kernel offset o live in the block
// w.middleRows(o_index * in_ch, in_ch).
template <typename Scalar>
class Conv1dLayer : public Layer<Scalar> {
 public:
  Conv1dLayer(int filters, int kernel, double l2 = 0.0)
      : filters_(filters), kernel_(kernel), l2_(l2) {
    if (filters < 1 || kernel < 1) throw DataError("invalid conv1d geometry");
  }

  LayerKind kind() const override { return LayerKind::kConv1d; }

  Shape build(const Shape& in) override {
    in_ch_ = in.channels;
    lo_ = -((kernel_ - 1) / 2);
    w_.value.setZero(static_cast<Eigen::Index>(kernel_) * in_ch_, filters_);
    w_.grad = w_.value;
    w_.l2 = l2_;
    b_.value.setZero(1, filters_);
    b_.grad = b_.value;
    return {filters_, in.time};
  }

  void init(Rng& rng) override {
    const double a = std::sqrt(3.0 / (static_cast<double>(kernel_) * in_ch_));
    for (Eigen::Index j = 0; j < w_.value.cols(); ++j)
      for (Eigen::Index i = 0; i < w_.value.rows(); ++i)
        w_.value(i, j) = static_cast<Scalar>(rng.uniform(-a, a));
  }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng&) override {
    if (in.data.cols() != in_ch_)
      throw DataError("conv1d: expected " + std::to_string(in_ch_) +
                      " input channels, got " + std::to_string(in.data.cols()));
    out.starts = in.starts;
    out.data.setZero(in.data.rows(), filters_);
    out.data.rowwise() += b_.value.row(0);
    for (int s = 0; s < in.n_samples(); ++s) {
      const int t0 = in.starts[s], n = in.rows(s);
      for (int k = 0; k < kernel_; ++k) {
        const int o = lo_ + k;
        const int a = std::max(0, -o), b = n - std::max(0, o);
        if (b <= a) continue;
        out.data.middleRows(t0 + a, b - a).noalias() +=
            in.data.middleRows(t0 + a + o, b - a) *
            w_.value.middleRows(static_cast<Eigen::Index>(k) * in_ch_, in_ch_);
      }
    }
    if (mode == Mode::kTrain) {
      cached_in_ = in.data;
      cached_starts_ = in.starts;
    }
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    gin.starts = cached_starts_;
    gin.data.setZero(cached_in_.rows(), in_ch_);
    b_.grad.row(0) += gout.data.colwise().sum();
    const int ns = static_cast<int>(cached_starts_.size()) - 1;
    for (int s = 0; s < ns; ++s) {
      const int t0 = cached_starts_[s];
      const int n = cached_starts_[s + 1] - t0;
      for (int k = 0; k < kernel_; ++k) {
        const int o = lo_ + k;
        const int a = std::max(0, -o), b = n - std::max(0, o);
        if (b <= a) continue;
        auto wk = w_.value.middleRows(static_cast<Eigen::Index>(k) * in_ch_, in_ch_);
        w_.grad.middleRows(static_cast<Eigen::Index>(k) * in_ch_, in_ch_).noalias() +=
            cached_in_.middleRows(t0 + a + o, b - a).transpose() *
            gout.data.middleRows(t0 + a, b - a);
        gin.data.middleRows(t0 + a + o, b - a).noalias() +=
            gout.data.middleRows(t0 + a, b - a) * wk.transpose();
      }
    }
  }

  void collect_params(std::vector<Param<Scalar>*>& out) override {
    out.push_back(&w_);
    out.push_back(&b_);
  }

  double reg_loss() const override {
    return 0.5 * l2_ * static_cast<double>(w_.value.squaredNorm());
  }

  std::string spec() const override {
    return "conv1d filters=" + std::to_string(filters_) +
           " kernel=" + std::to_string(kernel_) +
           " l2=" + detail::fmt_double(l2_);
  }

 private:
  int filters_, kernel_, in_ch_ = 0, lo_ = 0;
  double l2_;
  Param<Scalar> w_, b_;
  Mat<Scalar> cached_in_;
  std::vector<int> cached_starts_;
};

// Time-delay layer: an affine map over a set of frame offsets, evaluated
// only where the whole context fits (no padding).  Each sample shrinks by
// max(context) - min(context) rows.
template <typename Scalar>
class TdnnLayer : public Layer<Scalar> {
 public:
  TdnnLayer(int units, std::vector<int> context, double l2 = 0.0)
      : units_(units), context_(std::move(context)), l2_(l2) {
    if (units < 1 || context_.empty()) throw DataError("invalid tdnn geometry");
    for (std::size_t i = 1; i < context_.size(); ++i)
      if (context_[i] <= context_[i - 1])
        throw DataError("tdnn context offsets must be strictly increasing");
  }

  LayerKind kind() const override { return LayerKind::kTdnn; }

  Shape build(const Shape& in) override {
    in_ch_ = in.channels;
    span_ = context_.back() - context_.front();
    std::optional<int> t;
    if (in.time) {
      if (*in.time - span_ < 1)
        throw DataError("tdnn context wider than the input sequence");
      t = *in.time - span_;
    }
    w_.value.setZero(static_cast<Eigen::Index>(context_.size()) * in_ch_, units_);
    w_.grad = w_.value;
    w_.l2 = l2_;
    b_.value.setZero(1, units_);
    b_.grad = b_.value;
    return {units_, t};
  }

  void init(Rng& rng) override {
    const double a =
        std::sqrt(3.0 / (static_cast<double>(context_.size()) * in_ch_));
    for (Eigen::Index j = 0; j < w_.value.cols(); ++j)
      for (Eigen::Index i = 0; i < w_.value.rows(); ++i)
        w_.value(i, j) = static_cast<Scalar>(rng.uniform(-a, a));
  }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng&) override {
    if (in.data.cols() != in_ch_)
      throw DataError("tdnn: expected " + std::to_string(in_ch_) +
                      " input channels, got " + std::to_string(in.data.cols()));
    std::vector<int> out_rows(in.n_samples());
    for (int s = 0; s < in.n_samples(); ++s) {
      out_rows[s] = in.rows(s) - span_;
      if (out_rows[s] < 1)
        throw DataError("tdnn: sample with " + std::to_string(in.rows(s)) +
                        " frames is shorter than the context span " +
                        std::to_string(span_ + 1));
    }
    out = Batch<Scalar>::zeros(out_rows, units_);
    out.data.rowwise() += b_.value.row(0);
    for (int s = 0; s < in.n_samples(); ++s) {
      const int src0 = in.starts[s], dst0 = out.starts[s], n = out_rows[s];
      for (std::size_t j = 0; j < context_.size(); ++j) {
        const int shift = context_[j] - context_.front();
        out.data.middleRows(dst0, n).noalias() +=
            in.data.middleRows(src0 + shift, n) *
            w_.value.middleRows(static_cast<Eigen::Index>(j) * in_ch_, in_ch_);
      }
    }
    if (mode == Mode::kTrain) {
      cached_in_ = in.data;
      cached_starts_ = in.starts;
      cached_out_starts_ = out.starts;
    }
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    gin.starts = cached_starts_;
    gin.data.setZero(cached_in_.rows(), in_ch_);
    b_.grad.row(0) += gout.data.colwise().sum();
    const int ns = static_cast<int>(cached_starts_.size()) - 1;
    for (int s = 0; s < ns; ++s) {
      const int src0 = cached_starts_[s], dst0 = cached_out_starts_[s];
      const int n = cached_out_starts_[s + 1] - dst0;
      for (std::size_t j = 0; j < context_.size(); ++j) {
        const int shift = context_[j] - context_.front();
        auto wj = w_.value.middleRows(static_cast<Eigen::Index>(j) * in_ch_, in_ch_);
        w_.grad.middleRows(static_cast<Eigen::Index>(j) * in_ch_, in_ch_).noalias() +=
            cached_in_.middleRows(src0 + shift, n).transpose() *
            gout.data.middleRows(dst0, n);
        gin.data.middleRows(src0 + shift, n).noalias() +=
            gout.data.middleRows(dst0, n) * wj.transpose();
      }
    }
  }

  void collect_params(std::vector<Param<Scalar>*>& out) override {
    out.push_back(&w_);
    out.push_back(&b_);
  }

  double reg_loss() const override {
    return 0.5 * l2_ * static_cast<double>(w_.value.squaredNorm());
  }

  std::string spec() const override {
    std::ostringstream os;
    os << "tdnn units=" << units_ << " context=";
    for (std::size_t i = 0; i < context_.size(); ++i)
      os << (i ? "," : "") << context_[i];
    os << " l2=" << detail::fmt_double(l2_);
    return os.str();
  }

 private:
  int units_, in_ch_ = 0, span_ = 0;
  std::vector<int> context_;
  double l2_;
  Param<Scalar> w_, b_;
  Mat<Scalar> cached_in_;
  std::vector<int> cached_starts_, cached_out_starts_;
};

// Per-channel normalization over every row in the minibatch.  Train mode
// uses batch statistics (biased variance) and refreshes the running
// estimates; infer mode uses the running estimates.
template <typename Scalar>
class BatchNormLayer : public Layer<Scalar> {
 public:
  explicit BatchNormLayer(double momentum = 0.9, double eps = 1e-8)
      : momentum_(momentum), eps_(eps) {
    if (momentum < 0 || momentum >= 1) throw DataError("invalid batch_norm momentum");
  }

  LayerKind kind() const override { return LayerKind::kBatchNorm; }

  Shape build(const Shape& in) override {
    ch_ = in.channels;
    gamma_.value.setOnes(1, ch_);
    gamma_.grad.setZero(1, ch_);
    beta_.value.setZero(1, ch_);
    beta_.grad.setZero(1, ch_);
    running_mean_.setZero(1, ch_);
    running_var_.setOnes(1, ch_);
    return in;
  }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng&) override {
    if (in.data.cols() != ch_)
      throw DataError("batch_norm: expected " + std::to_string(ch_) +
                      " channels, got " + std::to_string(in.data.cols()));
    out.starts = in.starts;
    const auto rows = static_cast<double>(in.data.rows());
    if (mode == Mode::kTrain) {
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mean =
          in.data.colwise().mean();
      Mat<Scalar> centered = in.data.rowwise() - mean;
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> var =
          centered.array().square().colwise().mean();
      inv_std_ = (var.array() + static_cast<Scalar>(eps_)).sqrt().inverse();
      xhat_ = centered.array().rowwise() * inv_std_.array();
      out.data = (xhat_.array().rowwise() * gamma_.value.row(0).array())
                     .rowwise() + beta_.value.row(0).array();
      running_mean_ = static_cast<Scalar>(momentum_) * running_mean_ +
                      static_cast<Scalar>(1 - momentum_) * mean.matrix();
      running_var_ = static_cast<Scalar>(momentum_) * running_var_ +
                     static_cast<Scalar>(1 - momentum_) * var.matrix();
      (void)rows;
    } else {
      Eigen::Array<Scalar, 1, Eigen::Dynamic> inv =
          (running_var_.row(0).array() + static_cast<Scalar>(eps_)).sqrt().inverse();
      out.data = (((in.data.rowwise() - running_mean_.row(0)).array().rowwise() * inv)
                      .rowwise() * gamma_.value.row(0).array())
                     .rowwise() + beta_.value.row(0).array();
    }
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    const auto& g = gout.data;
    gin.starts = gout.starts;
    beta_.grad.row(0) += g.colwise().sum();
    gamma_.grad.row(0) += (g.array() * xhat_.array()).colwise().sum().matrix();
    // dx = gamma * inv_std * (g - mean(g) - xhat * mean(g .* xhat))
    Eigen::Array<Scalar, 1, Eigen::Dynamic> gmean = g.colwise().mean();
    Eigen::Array<Scalar, 1, Eigen::Dynamic> gxmean =
        (g.array() * xhat_.array()).colwise().mean();
    gin.data = ((g.array().rowwise() - gmean) -
                (xhat_.array().rowwise() * gxmean)).rowwise() *
               (gamma_.value.row(0).array() * inv_std_.array());
  }

  void collect_params(std::vector<Param<Scalar>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

  void collect_tensors(std::vector<Mat<Scalar>*>& out) override {
    out.push_back(&gamma_.value);
    out.push_back(&beta_.value);
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
  }

  void set_running_stats(const Mat<Scalar>& mean, const Mat<Scalar>& var) {
    running_mean_ = mean;
    running_var_ = var;
  }

  std::string spec() const override {
    return "batch_norm momentum=" + detail::fmt_double(momentum_) +
           " eps=" + detail::fmt_double(eps_);
  }

 private:
  int ch_ = 0;
  double momentum_, eps_;
  Param<Scalar> gamma_, beta_;
  Mat<Scalar> running_mean_, running_var_;
  // Train-forward caches.
  Mat<Scalar> xhat_;
  Eigen::Array<Scalar, 1, Eigen::Dynamic> inv_std_;
};

template <typename Scalar>
class ReluLayer : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::kRelu; }
  Shape build(const Shape& in) override { return in; }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng&) override {
    out.starts = in.starts;
    out.data = in.data.cwiseMax(Scalar(0));
    if (mode == Mode::kTrain)
      mask_ = (in.data.array() > Scalar(0)).template cast<Scalar>();
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    gin.starts = gout.starts;
    gin.data = gout.data.cwiseProduct(mask_);
  }

 private:
  Mat<Scalar> mask_;
};

template <typename Scalar>
class TanhLayer : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::kTanh; }
  Shape build(const Shape& in) override { return in; }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng&) override {
    out.starts = in.starts;
    out.data = in.data.array().tanh();
    if (mode == Mode::kTrain) y_ = out.data;
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    gin.starts = gout.starts;
    gin.data = gout.data.array() * (Scalar(1) - y_.array().square());
  }

 private:
  Mat<Scalar> y_;
};

// Additive white noise, training only.  std == 0 is an exact no-op that
// draws nothing from the stream, so a disabled layer cannot shift any
// downstream randomness.
template <typename Scalar>
class GaussianNoiseLayer : public Layer<Scalar> {
 public:
  explicit GaussianNoiseLayer(double stddev) : stddev_(stddev) {
    if (stddev < 0) throw DataError("noise stddev must be non-negative");
  }

  LayerKind kind() const override { return LayerKind::kGaussianNoise; }
  Shape build(const Shape& in) override { return in; }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng& rng) override {
    out.starts = in.starts;
    out.data = in.data;
    if (mode == Mode::kTrain && stddev_ > 0) {
      for (Eigen::Index j = 0; j < out.data.cols(); ++j)
        for (Eigen::Index i = 0; i < out.data.rows(); ++i)
          out.data(i, j) += static_cast<Scalar>(rng.normal(0.0, stddev_));
    }
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    gin = gout;
  }

  std::string spec() const override {
    return "gaussian_noise std=" + detail::fmt_double(stddev_);
  }

 private:
  double stddev_;
};

template <typename Scalar>
class MaxPool1dLayer : public Layer<Scalar> {
 public:
  MaxPool1dLayer(int pool, int stride) : pool_(pool), stride_(stride) {
    if (pool < 1 || stride < 1) throw DataError("invalid max_pool1d geometry");
  }

  LayerKind kind() const override { return LayerKind::kMaxPool1d; }

  Shape build(const Shape& in) override {
    ch_ = in.channels;
    std::optional<int> t;
    if (in.time) {
      if (*in.time < pool_)
        throw DataError("max_pool1d window longer than the sequence");
      t = (*in.time - pool_) / stride_ + 1;
    }
    return {ch_, t};
  }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng&) override {
    std::vector<int> out_rows(in.n_samples());
    for (int s = 0; s < in.n_samples(); ++s) {
      if (in.rows(s) < pool_)
        throw DataError("max_pool1d: sample shorter than the pooling window");
      out_rows[s] = (in.rows(s) - pool_) / stride_ + 1;
    }
    out = Batch<Scalar>::zeros(out_rows, ch_);
    argmax_.resize(out.data.rows(), ch_);
    in_rows_total_ = static_cast<int>(in.data.rows());
    in_starts_ = in.starts;
    for (int s = 0; s < in.n_samples(); ++s) {
      for (int t = 0; t < out_rows[s]; ++t) {
        const int src = in.starts[s] + t * stride_;
        const int dst = out.starts[s] + t;
        for (int c = 0; c < ch_; ++c) {
          int best = src;
          Scalar bv = in.data(src, c);
          for (int k = 1; k < pool_; ++k) {
            if (in.data(src + k, c) > bv) {  // ties keep the earliest row
              bv = in.data(src + k, c);
              best = src + k;
            }
          }
          out.data(dst, c) = bv;
          argmax_(dst, c) = best;
        }
      }
    }
    (void)mode;
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    gin.starts = in_starts_;
    gin.data.setZero(in_rows_total_, ch_);
    for (Eigen::Index r = 0; r < gout.data.rows(); ++r)
      for (int c = 0; c < ch_; ++c)
        gin.data(argmax_(r, c), c) += gout.data(r, c);
  }

  std::string spec() const override {
    return "max_pool1d pool=" + std::to_string(pool_) +
           " stride=" + std::to_string(stride_);
  }

 private:
  int pool_, stride_, ch_ = 0;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmax_;
  int in_rows_total_ = 0;
  std::vector<int> in_starts_;
};

// Collapses each sample's frames to [mean, std] per channel (population
// standard deviation).  Needs at least two frames per sample.
template <typename Scalar>
class StatsPoolLayer : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::kStatsPool; }

  Shape build(const Shape& in) override {
    ch_ = in.channels;
    if (in.time && *in.time < 2)
      throw DataError("stats_pool needs at least 2 frames per sample");
    return {2 * ch_, 1};
  }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng&) override {
    const int ns = in.n_samples();
    std::vector<int> ones(ns, 1);
    out = Batch<Scalar>::zeros(ones, 2 * ch_);
    if (mode == Mode::kTrain) {
      cached_in_ = in.data;
      cached_starts_ = in.starts;
      mean_.resize(ns, ch_);
      std_.resize(ns, ch_);
    }
    for (int s = 0; s < ns; ++s) {
      const int t = in.rows(s);
      if (t < 2)
        throw DataError("stats_pool: sample with " + std::to_string(t) +
                        " frames; need at least 2");
      auto x = in.sample(s);
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mu = x.colwise().mean();
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> var =
          (x.rowwise() - mu).array().square().colwise().mean();
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> sd = var.array().max(Scalar(0)).sqrt();
      out.data.block(s, 0, 1, ch_) = mu;
      out.data.block(s, ch_, 1, ch_) = sd;
      if (mode == Mode::kTrain) {
        mean_.row(s) = mu;
        std_.row(s) = sd;
      }
    }
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    gin.starts = cached_starts_;
    gin.data.setZero(cached_in_.rows(), ch_);
    const int ns = static_cast<int>(cached_starts_.size()) - 1;
    for (int s = 0; s < ns; ++s) {
      const int t0 = cached_starts_[s];
      const int t = cached_starts_[s + 1] - t0;
      const auto gmu = gout.data.block(s, 0, 1, ch_).array();
      const auto gsd = gout.data.block(s, ch_, 1, ch_).array();
      Eigen::Array<Scalar, 1, Eigen::Dynamic> safe =
          std_.row(s).array().max(Scalar(1e-8));
      for (int r = 0; r < t; ++r) {
        gin.data.row(t0 + r).array() +=
            gmu / Scalar(t) +
            gsd * (cached_in_.row(t0 + r).array() - mean_.row(s).array()) /
                (Scalar(t) * safe);
      }
    }
  }

 private:
  int ch_ = 0;
  Mat<Scalar> cached_in_, mean_, std_;
  std::vector<int> cached_starts_;
};

// Row-major flattening of each sample: out[t*C + c] = in(t, c).  Only valid
// in graphs whose sample length is fixed, which the build pass enforces.
template <typename Scalar>
class FlattenLayer : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::kFlatten; }

  Shape build(const Shape& in) override {
    if (!in.time)
      throw DataError("flatten requires a fixed per-sample length");
    ch_ = in.channels;
    time_ = *in.time;
    return {time_ * ch_, 1};
  }

  void forward(const Batch<Scalar>& in, Batch<Scalar>& out, Mode mode,
               Rng&) override {
    const int ns = in.n_samples();
    std::vector<int> ones(ns, 1);
    out = Batch<Scalar>::zeros(ones, time_ * ch_);
    for (int s = 0; s < ns; ++s) {
      if (in.rows(s) != time_)
        throw DataError("flatten: sample has " + std::to_string(in.rows(s)) +
                        " rows, graph fixed " + std::to_string(time_));
      auto x = in.sample(s);
      for (int t = 0; t < time_; ++t)
        for (int c = 0; c < ch_; ++c) out.data(s, t * ch_ + c) = x(t, c);
    }
    (void)mode;
  }

  void backward(const Batch<Scalar>& gout, Batch<Scalar>& gin) override {
    const int ns = gout.n_samples();
    std::vector<int> rows(ns, time_);
    gin = Batch<Scalar>::zeros(rows, ch_);
    for (int s = 0; s < ns; ++s) {
      auto g = gin.sample(s);
      for (int t = 0; t < time_; ++t)
        for (int c = 0; c < ch_; ++c) g(t, c) = gout.data(s, t * ch_ + c);
    }
  }

 private:
  int ch_ = 0, time_ = 0;
};

// ---------------------------------------------------------------------------
// Network

template <typename Scalar>
class Network {
 public:
  explicit Network(std::uint64_t seed) : seed_(seed), rng_(seed) {}

  Network& add(std::unique_ptr<Layer<Scalar>> layer) {
    if (built_) throw DataError("cannot add layers to a built network");
    layers_.push_back(std::move(layer));
    return *this;
  }

  // Convenience builders.
  Network& dense(int units, double l2 = 0) {
    return add(std::make_unique<DenseLayer<Scalar>>(units, l2));
  }
  Network& conv1d(int filters, int kernel, double l2 = 0) {
    return add(std::make_unique<Conv1dLayer<Scalar>>(filters, kernel, l2));
  }
  Network& tdnn(int units, std::vector<int> context, double l2 = 0) {
    return add(std::make_unique<TdnnLayer<Scalar>>(units, std::move(context), l2));
  }
  Network& batch_norm() {
    return add(std::make_unique<BatchNormLayer<Scalar>>());
  }
  Network& relu() { return add(std::make_unique<ReluLayer<Scalar>>()); }
  Network& tanh() { return add(std::make_unique<TanhLayer<Scalar>>()); }
  Network& gaussian_noise(double stddev) {
    return add(std::make_unique<GaussianNoiseLayer<Scalar>>(stddev));
  }
  Network& max_pool1d(int pool, int stride) {
    return add(std::make_unique<MaxPool1dLayer<Scalar>>(pool, stride));
  }
  Network& stats_pool() {
    return add(std::make_unique<StatsPoolLayer<Scalar>>());
  }
  Network& flatten() { return add(std::make_unique<FlattenLayer<Scalar>>()); }

  // Symbolic shape pass followed by parameter initialization.
  void build(const Shape& input) {
    if (built_) throw DataError("network already built");
    if (layers_.empty()) throw DataError("network has no layers");
    input_shape_ = input;
    Shape s = input;
    shapes_.clear();
    shapes_.push_back(s);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      try {
        s = layers_[i]->build(s);
      } catch (const DataError& e) {
        throw DataError(layer_context(i) + e.what());
      }
      shapes_.push_back(s);
    }
    for (auto& l : layers_) l->init(rng_);
    built_ = true;
  }

  Batch<Scalar> forward(const Batch<Scalar>& in, Mode mode) {
    return forward_prefix(in, static_cast<int>(layers_.size()), mode);
  }

  // Runs layers [0, n_layers) only; used to tap intermediate activations.
  Batch<Scalar> forward_prefix(const Batch<Scalar>& in, int n_layers,
                               Mode mode) {
    check_built();
    if (n_layers < 1 || n_layers > static_cast<int>(layers_.size()))
      throw DataError("forward prefix out of range");
    if (in.data.cols() != input_shape_.channels)
      throw DataError("network input: expected " +
                      std::to_string(input_shape_.channels) +
                      " channels, got " + std::to_string(in.data.cols()));
    Batch<Scalar> a = in, b;
    for (int i = 0; i < n_layers; ++i) {
      try {
        layers_[i]->forward(a, b, mode, rng_);
      } catch (const DataError& e) {
        throw DataError(layer_context(i) + e.what());
      }
      std::swap(a, b);
    }
    last_mode_ = mode;
    return a;
  }

  // Backpropagates the loss gradient and adds the weight-decay term
  // l2 * w to every regularized parameter gradient.
  void backward(const Batch<Scalar>& gout) {
    check_built();
    if (last_mode_ != Mode::kTrain)
      throw DataError("backward requires a preceding train-mode forward");
    Batch<Scalar> g = gout, gin;
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
      layers_[i]->backward(g, gin);
      std::swap(g, gin);
    }
    for (Param<Scalar>* p : params())
      if (p->l2 > 0)
        p->grad += static_cast<Scalar>(p->l2) * p->value;
  }

  std::vector<Param<Scalar>*> params() {
    std::vector<Param<Scalar>*> ps;
    for (auto& l : layers_) l->collect_params(ps);
    return ps;
  }

  std::vector<Mat<Scalar>*> tensors() {
    std::vector<Mat<Scalar>*> ts;
    for (auto& l : layers_) l->collect_tensors(ts);
    return ts;
  }

  void zero_grads() {
    for (Param<Scalar>* p : params()) p->grad.setZero();
  }

  double reg_loss() const {
    double r = 0;
    for (const auto& l : layers_) r += l->reg_loss();
    return r;
  }

  // Index (layer count) and kind of the first layer whose output goes
  // non-finite on this batch, or -1 if all outputs are finite.
  int first_nonfinite_layer(const Batch<Scalar>& in, Mode mode) {
    Batch<Scalar> a = in, b;
    if (!a.all_finite()) return 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i]->forward(a, b, mode, rng_);
      if (!b.all_finite()) return static_cast<int>(i);
      std::swap(a, b);
    }
    return -1;
  }

  int n_layers() const { return static_cast<int>(layers_.size()); }
  Layer<Scalar>& layer(int i) { return *layers_.at(i); }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shapes_.back(); }
  const Shape& shape_after(int i) const { return shapes_.at(i + 1); }
  std::uint64_t seed() const { return seed_; }
  bool built() const { return built_; }

  // Resets the private random stream (noise layers).  Finite-difference
  // checks call this before every evaluation so noise stays frozen.
  void reseed(std::uint64_t seed) { rng_.reseed(seed); }

  std::string layer_context(std::size_t i) const {
    return "layer " + std::to_string(i) + " (" +
           layer_kind_name(layers_[i]->kind()) + "): ";
  }

 private:
  void check_built() const {
    if (!built_) throw DataError("network not built");
  }

  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
  std::vector<Shape> shapes_;
  Shape input_shape_;
  std::uint64_t seed_;
  Rng rng_;
  Mode last_mode_ = Mode::kInfer;
  bool built_ = false;
};

}  // namespace rd::nnet
