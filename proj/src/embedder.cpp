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

#include "rd/embedder.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "rd/binio.hpp"
#include "rd/metrics.hpp"
#include "rd/nnet_io.hpp"
#include "rd/simcorpus.hpp"

namespace rd::emb {

const std::vector<std::string>& joint_class_universe() {
  static const std::vector<std::string> universe = [] {
    std::vector<std::string> v;
    for (const auto& env : sim::all_envs())
      for (const auto& attack : sim::all_attacks())
        v.push_back(env.id() + attack.id());
    return v;
  }();
  return universe;
}

// ---------------------------------------------------------------------------
// TDNN

TdnnConfig full_scale_tdnn_config() {
  TdnnConfig c;
  c.frame_units = 512;
  c.stats_units = 1500;
  c.segment_units = 512;
  return c;
}

int XvecExtractor::embedding_dim() const {
  return net->shape_after(embedding_prefix - 1).channels;
}

XvecExtractor build_tdnn(const TdnnConfig& cfg, std::uint64_t seed) {
  if (cfg.frame_dim < 1 || cfg.frame_units < 1 || cfg.stats_units < 1 ||
      cfg.segment_units < 1 || cfg.n_classes < 2)
    throw DataError("invalid TDNN configuration");
  XvecExtractor ex;
  ex.net = std::make_unique<nnet::Network<float>>(seed);
  auto& n = *ex.net;
  const auto block = [&n, &cfg](int units, std::vector<int> ctx) {
    n.tdnn(units, std::move(ctx), cfg.l2);
    n.relu();
    n.batch_norm();
  };
  block(cfg.frame_units, {-2, -1, 0, 1, 2});
  block(cfg.frame_units, {-2, 0, 2});
  block(cfg.frame_units, {-3, 0, 3});
  block(cfg.frame_units, {0});
  block(cfg.stats_units, {0});
  n.stats_pool();
  // Embeddings tap this layer's affine output.
  n.dense(cfg.segment_units, cfg.l2);
  ex.embedding_prefix = n.n_layers();
  n.relu();
  n.batch_norm();
  n.dense(cfg.segment_units, cfg.l2);
  n.relu();
  n.batch_norm();
  n.dense(cfg.n_classes, cfg.l2);
  n.build({cfg.frame_dim, std::nullopt});
  return ex;
}

XvecTrainResult train_xvector_extractor(
    const std::vector<MatF>& features, const std::vector<std::string>& labels,
    const std::vector<std::string>& classes, const XvecTrainOptions& opt,
    std::uint64_t seed) {
  if (features.size() != labels.size())
    throw DataError("feature/label count mismatch");
  if (classes.size() < 2) throw DataError("need at least 2 classes");
  if (features.empty()) throw DataError("empty training set");

  std::map<std::string, int> class_index;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (!class_index.emplace(classes[i], static_cast<int>(i)).second)
      throw DataError("duplicate class '" + classes[i] + "'");
  }

  std::vector<int> counts(classes.size(), 0);
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = class_index.find(labels[i]);
    if (it == class_index.end())
      throw DataError("label '" + labels[i] + "' not in the class list");
    y[i] = it->second;
    ++counts[it->second];
  }
  std::string missing;
  int n_missing = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (counts[c] == 0) {
      if (n_missing < 20) missing += (n_missing ? " " : "") + classes[c];
      ++n_missing;
    }
  }
  if (n_missing > 0)
    throw DataError("training data has no examples for " +
                    std::to_string(n_missing) + " class(es): " + missing +
                    (n_missing > 20 ? " ..." : ""));

  TdnnConfig tdnn = opt.tdnn;
  tdnn.n_classes = static_cast<int>(classes.size());
  tdnn.frame_dim = static_cast<int>(features.front().cols());

  XvecTrainResult result;
  result.extractor = build_tdnn(tdnn, derive_seed(seed, 0x6e6574));
  result.extractor.classes = classes;

  nnet::Dataset<float> data;
  data.inputs = features;
  data.labels = y;

  nnet::TrainConfig<float> tc = opt.trainer;
  tc.loss = nnet::LossKind::kSoftmaxCrossEntropy;
  tc.seed = derive_seed(seed, 0x747264);
  if (opt.chunk_frames > 0) {
    const int chunk = opt.chunk_frames;
    tc.train_transform = [chunk](const MatF& m, Rng& rng) -> MatF {
      const int t = static_cast<int>(m.rows());
      if (t <= chunk) return m;
      const int start =
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(t - chunk + 1)));
      return m.middleRows(start, chunk);
    };
  }
  result.stats = nnet::train(*result.extractor.net, data, tc);
  return result;
}

VecF extract_xvector(XvecExtractor& ex, const MatF& frames) {
  if (!ex.net) throw DataError("extractor has no network");
  nnet::Batch<float> in = nnet::Batch<float>::from_matrices({frames});
  nnet::Batch<float> out =
      ex.net->forward_prefix(in, ex.embedding_prefix, nnet::Mode::kInfer);
  return out.data.row(0);
}

void save_extractor(XvecExtractor& ex, const std::string& path,
                    std::uint64_t config_hash) {
  nnet::save_network(*ex.net, path, config_hash);
}

LoadedExtractor load_extractor(const std::string& path,
                               const std::vector<std::string>& classes) {
  auto loaded = nnet::load_network<float>(path);
  LoadedExtractor out;
  out.config_hash = loaded.config_hash;
  out.extractor.net = std::move(loaded.net);
  out.extractor.classes = classes;
  // The embedding tap is the first dense layer (right after stats pooling).
  auto& net = *out.extractor.net;
  out.extractor.embedding_prefix = 0;
  for (int i = 0; i < net.n_layers(); ++i) {
    if (net.layer(i).kind() == nnet::LayerKind::kDense) {
      out.extractor.embedding_prefix = i + 1;
      break;
    }
  }
  if (out.extractor.embedding_prefix == 0)
    throw DataError(path + ": no dense layer to tap embeddings from");
  if (static_cast<int>(classes.size()) != net.output_shape().channels)
    throw DataError(path + ": checkpoint has " +
                    std::to_string(net.output_shape().channels) +
                    " classes, caller supplied " +
                    std::to_string(classes.size()));
  return out;
}

// ---------------------------------------------------------------------------
// LDA

LdaModel fit_lda(const std::vector<VecF>& vectors,
                 const std::vector<std::string>& labels, int out_dim,
                 double reg) {
  if (vectors.size() != labels.size())
    throw DataError("vector/label count mismatch");
  if (vectors.empty()) throw DataError("cannot fit LDA on an empty set");
  if (out_dim < 1) throw DataError("LDA output dimension must be positive");
  const Eigen::Index d = vectors.front().size();
  for (const VecF& v : vectors)
    if (v.size() != d) throw DataError("LDA input vectors disagree on dimension");
  if (out_dim > d)
    throw DataError("LDA output dimension exceeds the input dimension");

  // Class partition (insertion order = first appearance, deterministic).
  std::vector<std::string> classes;
  std::map<std::string, int> index;
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = index.find(labels[i]);
    if (it == index.end()) {
      it = index.emplace(labels[i], static_cast<int>(classes.size())).first;
      classes.push_back(labels[i]);
    }
    y[i] = it->second;
  }
  const int k = static_cast<int>(classes.size());
  if (k <= out_dim)
    throw DataError("LDA needs more than " + std::to_string(out_dim) +
                    " classes, got " + std::to_string(k));

  // Scatter matrices in double precision.
  const Eigen::Index n = static_cast<Eigen::Index>(vectors.size());
  MatD x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    x.row(i) = vectors[i].cast<double>().transpose();
  const Eigen::RowVectorXd mu = x.colwise().mean();

  MatD class_mu = MatD::Zero(k, d);
  std::vector<int> counts(k, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    class_mu.row(y[i]) += x.row(i);
    ++counts[y[i]];
  }
  for (int c = 0; c < k; ++c) class_mu.row(c) /= counts[c];

  MatD sw = MatD::Zero(d, d);
  MatD sb = MatD::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd dv = x.row(i) - class_mu.row(y[i]);
    sw.noalias() += dv.transpose() * dv;
  }
  for (int c = 0; c < k; ++c) {
    const Eigen::RowVectorXd dv = class_mu.row(c) - mu;
    sb.noalias() += counts[c] * (dv.transpose() * dv);
  }
  sw /= static_cast<double>(n);
  sb /= static_cast<double>(n);

  // Shrinkage keeps Sw positive definite on rank-deficient desk-scale data.
  // With one example per class Sw vanishes outright; fall back to the
  // between-class scale, which degrades the solve gracefully into a
  // principal-component analysis of Sb.
  double scale = sw.trace() / static_cast<double>(d);
  if (scale <= 0.0) scale = sb.trace() / static_cast<double>(d);
  if (scale <= 0.0) throw NumericError("LDA scatter is identically zero");
  sw += (reg * scale) * MatD::Identity(d, d);

  Eigen::GeneralizedSelfAdjointEigenSolver<MatD> solver(sb, sw);
  if (solver.info() != Eigen::Success)
    throw NumericError("LDA generalized eigensolve failed");

  // Eigenvalues ascend; take the top out_dim, largest first, and fix each
  // column's sign so its largest-magnitude entry is positive.
  MatD proj(d, out_dim);
  for (int j = 0; j < out_dim; ++j) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    proj.col(j) = v;
  }

  LdaModel m;
  m.projection = proj.cast<float>();
  m.global_mean = mu.transpose().cast<float>();
  m.classes = classes;
  m.class_means.resize(k, out_dim);
  MatD projected_mu =
      (class_mu.rowwise() - mu) * proj;  // class means in LDA space
  m.class_means = projected_mu.cast<float>();
  return m;
}

VecF lda_project(const LdaModel& lda, const VecF& x) {
  if (x.size() != lda.global_mean.size())
    throw DataError("LDA projection: expected dimension " +
                    std::to_string(lda.global_mean.size()) + ", got " +
                    std::to_string(x.size()));
  return lda.projection.transpose() * (x - lda.global_mean);
}

void save_lda(const LdaModel& lda, const std::string& path,
              std::uint64_t config_hash) {
  auto os = binio::open_out(path);
  binio::write_magic(os, "RDLDA01");
  binio::write_pod<std::uint64_t>(os, config_hash);
  binio::write_pod<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(lda.global_mean.size()));
  binio::write_pod<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(lda.projection.cols()));
  for (Eigen::Index j = 0; j < lda.projection.cols(); ++j)
    for (Eigen::Index i = 0; i < lda.projection.rows(); ++i)
      binio::write_pod<float>(os, lda.projection(i, j));
  for (Eigen::Index i = 0; i < lda.global_mean.size(); ++i)
    binio::write_pod<float>(os, lda.global_mean(i));
  binio::write_pod<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(lda.classes.size()));
  for (std::size_t c = 0; c < lda.classes.size(); ++c) {
    binio::write_string(os, lda.classes[c]);
    for (Eigen::Index j = 0; j < lda.class_means.cols(); ++j)
      binio::write_pod<float>(os, lda.class_means(static_cast<Eigen::Index>(c), j));
  }
  if (!os) throw DataError("write failed: " + path);
}

LoadedLda load_lda(const std::string& path) {
  auto is = binio::open_in(path);
  binio::expect_magic(is, "RDLDA01", path);
  LoadedLda out;
  out.config_hash = binio::read_pod<std::uint64_t>(is, "config hash");
  const auto in_dim = binio::read_pod<std::uint32_t>(is, "input dimension");
  const auto out_dim = binio::read_pod<std::uint32_t>(is, "output dimension");
  if (in_dim == 0 || out_dim == 0 || out_dim > in_dim)
    throw DataError(path + ": bad LDA dimensions");
  out.lda.projection.resize(in_dim, out_dim);
  for (std::uint32_t j = 0; j < out_dim; ++j)
    for (std::uint32_t i = 0; i < in_dim; ++i)
      out.lda.projection(i, j) = binio::read_pod<float>(is, "projection");
  out.lda.global_mean.resize(in_dim);
  for (std::uint32_t i = 0; i < in_dim; ++i)
    out.lda.global_mean(i) = binio::read_pod<float>(is, "global mean");
  const auto k = binio::read_pod<std::uint32_t>(is, "class count");
  out.lda.class_means.resize(k, out_dim);
  for (std::uint32_t c = 0; c < k; ++c) {
    out.lda.classes.push_back(binio::read_string(is, "class label"));
    for (std::uint32_t j = 0; j < out_dim; ++j)
      out.lda.class_means(c, j) = binio::read_pod<float>(is, "class mean");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analyses

double cosine_similarity(const VecF& a, const VecF& b) {
  if (a.size() != b.size())
    throw DataError("cosine similarity over mismatched dimensions");
  const double na = a.cast<double>().norm();
  const double nb = b.cast<double>().norm();
  if (na == 0 || nb == 0) return 0.0;
  return a.cast<double>().dot(b.cast<double>()) / (na * nb);
}

VerificationResult verification_eer(const LdaModel& lda,
                                    const std::vector<VecF>& test_vectors,
                                    const std::vector<std::string>& labels,
                                    std::uint64_t seed) {
  if (test_vectors.empty()) throw DataError("no verification trials");
  if (test_vectors.size() != labels.size())
    throw DataError("vector/label count mismatch");
  std::map<std::string, int> index;
  for (std::size_t c = 0; c < lda.classes.size(); ++c)
    index[lda.classes[c]] = static_cast<int>(c);

  Rng rng(seed);
  std::vector<double> target, nontarget;
  for (std::size_t i = 0; i < test_vectors.size(); ++i) {
    auto it = index.find(labels[i]);
    if (it == index.end())
      throw DataError("no enrollment mean for class '" + labels[i] + "'");
    const VecF v = lda_project(lda, test_vectors[i]);
    const VecF own = lda.class_means.row(it->second);
    target.push_back(cosine_similarity(v, own));
    // One impostor class, uniform over the others.
    int other = static_cast<int>(
        rng.uniform_int(static_cast<std::uint64_t>(lda.classes.size() - 1)));
    if (other >= it->second) ++other;
    const VecF imp = lda.class_means.row(other);
    nontarget.push_back(cosine_similarity(v, imp));
  }
  VerificationResult r;
  r.eer = metrics::eer(target, nontarget).eer;
  r.n_trials = static_cast<int>(target.size() + nontarget.size());
  return r;
}

MatF confusion_matrix(const std::vector<VecF>& train_vectors,
                      const std::vector<std::string>& train_groups,
                      const std::vector<VecF>& dev_vectors,
                      const std::vector<std::string>& dev_groups,
                      const std::vector<std::string>& groups) {
  if (train_vectors.size() != train_groups.size() ||
      dev_vectors.size() != dev_groups.size())
    throw DataError("vector/group count mismatch");
  if (groups.empty()) throw DataError("no groups requested");

  auto group_means = [&groups](const std::vector<VecF>& vecs,
                               const std::vector<std::string>& gs,
                               const char* split) {
    std::map<std::string, std::pair<VecD, int>> acc;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      auto& slot = acc[gs[i]];
      if (slot.second == 0) slot.first = VecD::Zero(vecs[i].size());
      slot.first += vecs[i].cast<double>();
      ++slot.second;
    }
    std::vector<VecF> means;
    for (const std::string& g : groups) {
      auto it = acc.find(g);
      if (it == acc.end() || it->second.second == 0)
        throw DataError("group '" + g + "' missing from the " + split +
                        " split");
      means.push_back(
          (it->second.first / it->second.second).cast<float>());
    }
    return means;
  };
  const std::vector<VecF> train_means =
      group_means(train_vectors, train_groups, "train");
  const std::vector<VecF> dev_means = group_means(dev_vectors, dev_groups, "dev");

  const int g = static_cast<int>(groups.size());
  MatF m(g, g);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      m(i, j) = static_cast<float>(
          cosine_similarity(dev_means[i], train_means[j]));
  return m;
}

GroupingStrength attack_grouping_strength(const MatF& attack_confusion) {
  const auto& attacks = sim::all_attacks();
  if (attack_confusion.rows() != static_cast<Eigen::Index>(attacks.size()) ||
      attack_confusion.cols() != static_cast<Eigen::Index>(attacks.size()))
    throw DataError("attack confusion matrix must be 10x10 in canonical order");
  GroupingStrength s;
  int nq = 0, nd = 0;
  double sq = 0, sd = 0;
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    for (std::size_t j = 0; j < attacks.size(); ++j) {
      if (i == j || attacks[i].bona_fide || attacks[j].bona_fide) continue;
      if (attacks[i].quality == attacks[j].quality) {
        sq += attack_confusion(static_cast<Eigen::Index>(i),
                               static_cast<Eigen::Index>(j));
        ++nq;
      }
      if (attacks[i].dist == attacks[j].dist) {
        sd += attack_confusion(static_cast<Eigen::Index>(i),
                               static_cast<Eigen::Index>(j));
        ++nd;
      }
    }
  }
  if (nq == 0 || nd == 0) throw DataError("degenerate attack grouping");
  s.same_quality = sq / nq;
  s.same_distance = sd / nd;
  return s;
}

}  // namespace rd::emb
