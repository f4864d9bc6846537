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
// Utterance embeddings for joint environment+attack classification: a TDNN
// classifier over the 270 joint classes, embeddings tapped from the first
// segment-level affine output (pre-ReLU), LDA reduction to 10 dimensions,
// and the mean-vector confusion analyses used to probe what the embedding
// space encodes.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rd/common.hpp"
#include "rd/nnet.hpp"
#include "rd/nnet_train.hpp"

namespace rd::emb {

// The 270 joint class ids in canonical order: environments lexicographic
// (aaa..ccc), attacks in the all_attacks order ("00", then AA..CC).
const std::vector<std::string>& joint_class_universe();

// ---------------------------------------------------------------------------
// TDNN extractor

struct TdnnConfig {
  int frame_dim = 40;      // input features per frame
  int frame_units = 64;    // first four frame-level layers
  int stats_units = 128;   // fifth frame-level layer; pooling doubles this
  int segment_units = 64;  // both segment-level layers = embedding size
  int n_classes = 270;
  double l2 = 0.0001;      // weight decay on every affine layer
};

// The paper-scale preset (512-dim embeddings, 1500-unit pre-pooling layer).
TdnnConfig full_scale_tdnn_config();

struct XvecExtractor {
  std::unique_ptr<nnet::Network<float>> net;
  // Number of leading layers whose output is the embedding: the first
  // segment-level affine, before its ReLU.
  int embedding_prefix = 0;
  std::vector<std::string> classes;

  int embedding_dim() const;
};

// Builds the 7-layer graph: five frame-level TDNN blocks with contexts
// {-2..2}, {-2,0,2}, {-3,0,3}, {0}, {0} (each tdnn+relu+batch_norm), stats
// pooling, two segment-level dense blocks, and the class logits.
XvecExtractor build_tdnn(const TdnnConfig& cfg, std::uint64_t seed);

struct XvecTrainOptions {
  TdnnConfig tdnn;
  nnet::TrainConfig<float> trainer;  // loss is forced to cross-entropy
  int chunk_frames = 100;            // random training crop; 0 = whole utt
};

struct XvecTrainResult {
  XvecExtractor extractor;
  nnet::TrainResult stats;
};

// Trains the classifier on (frames x dim) matrices with string labels drawn
// from `classes`.  Every class must be represented in the data; missing
// classes are reported by name.  The trainer's seed field is ignored in
// favor of the explicit argument.
XvecTrainResult train_xvector_extractor(
    const std::vector<MatF>& features, const std::vector<std::string>& labels,
    const std::vector<std::string>& classes, const XvecTrainOptions& opt,
    std::uint64_t seed);

// Embedding for one utterance (frames x dim).  Deterministic; needs enough
// frames for the TDNN contexts plus the 2-frame pooling minimum.
VecF extract_xvector(XvecExtractor& ex, const MatF& frames);

void save_extractor(XvecExtractor& ex, const std::string& path,
                    std::uint64_t config_hash);
struct LoadedExtractor {
  XvecExtractor extractor;
  std::uint64_t config_hash = 0;
};
// `classes` must be supplied by the caller (the checkpoint stores only the
// graph); the canonical pipeline always uses joint_class_universe().
LoadedExtractor load_extractor(const std::string& path,
                               const std::vector<std::string>& classes);

// ---------------------------------------------------------------------------
// LDA reduction

struct LdaModel {
  MatF projection;   // in_dim x out_dim, generalized-eigenvector columns
  VecF global_mean;  // in_dim
  std::vector<std::string> classes;
  MatF class_means;  // n_classes x out_dim, in projected space
};

// Multi-class LDA via the generalized eigenproblem Sb v = lambda Sw v, with
// Sw regularized by reg * (trace(Sw)/dim) * I.  Needs > out_dim classes.
LdaModel fit_lda(const std::vector<VecF>& vectors,
                 const std::vector<std::string>& labels, int out_dim = 10,
                 double reg = 1e-4);

VecF lda_project(const LdaModel& lda, const VecF& x);

void save_lda(const LdaModel& lda, const std::string& path,
              std::uint64_t config_hash);
struct LoadedLda {
  LdaModel lda;
  std::uint64_t config_hash = 0;
};
LoadedLda load_lda(const std::string& path);

// ---------------------------------------------------------------------------
// Analyses

double cosine_similarity(const VecF& a, const VecF& b);

// Verification over projected vectors: per test vector, one target trial
// against its own class's enrollment mean and one nontarget trial against a
// uniformly drawn other class (50% nontarget proportion).  Returns the EER.
struct VerificationResult {
  double eer = 0;
  int n_trials = 0;
};
VerificationResult verification_eer(const LdaModel& lda,
                                    const std::vector<VecF>& test_vectors,
                                    const std::vector<std::string>& labels,
                                    std::uint64_t seed);

// matrix(i, j) = cosine similarity between the dev mean of groups[i] and
// the train mean of groups[j].  Errors name any group absent from a split.
MatF confusion_matrix(const std::vector<VecF>& train_vectors,
                      const std::vector<std::string>& train_groups,
                      const std::vector<VecF>& dev_vectors,
                      const std::vector<std::string>& dev_groups,
                      const std::vector<std::string>& groups);

// Mean confusion-matrix similarity over spoof-class pairs that share the
// device-quality letter vs pairs that share the distance letter, given the
// 10x10 attack confusion matrix in all_attacks order ("00" excluded from
// both averages).  Quality > distance means the embedding space organizes
// attacks by device quality first.
struct GroupingStrength {
  double same_quality = 0;
  double same_distance = 0;
};
GroupingStrength attack_grouping_strength(const MatF& attack_confusion);

}  // namespace rd::emb
