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
// Pipeline stages: the work behind each CLI subcommand, exposed as plain
// functions so tests and the acceptance harness can drive them in-process.
// Every stage is deterministic given the config + seed, so rerunning a
// stage rewrites byte-identical artifacts.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rd/config.hpp"
#include "rd/embedder.hpp"
#include "rd/metrics.hpp"
#include "rd/nnet_train.hpp"

namespace rd::pipeline {

struct StageOptions {
  bool force = false;        // accept artifacts from other config hashes
  std::ostream* log = nullptr; // progress sink; nullptr = silent
};

// ---- Artifact locations ---------------------------------------------------

std::string manifest_path(const config::ExperimentConfig& cfg);
std::string asv_scores_path(const config::ExperimentConfig& cfg);
std::string feature_archive_path(const config::ExperimentConfig& cfg,
                                 const std::string& split);
std::string embedding_feature_path(const config::ExperimentConfig& cfg,
                                   const std::string& split);
std::string extractor_path(const config::ExperimentConfig& cfg);
std::string xvec_history_path(const config::ExperimentConfig& cfg);
std::string xvec_archive_path(const config::ExperimentConfig& cfg,
                              const std::string& split);
std::string lda_path(const config::ExperimentConfig& cfg);
std::string rescaler_path(const config::ExperimentConfig& cfg);
std::string cm_model_path(const config::ExperimentConfig& cfg);
std::string cm_history_path(const config::ExperimentConfig& cfg);
std::string scores_path(const config::ExperimentConfig& cfg,
                        const std::string& split);
std::string analysis_path(const config::ExperimentConfig& cfg);

// ---- Stages ---------------------------------------------------------------

// Renders the corpus (WAVs + manifest) and the simulated verifier scores.
void simulate(const config::ExperimentConfig& cfg, const StageOptions& opt);

// Writes, per non-empty split, the classifier front-end archive and the
// wide-band MFCC archive that feeds the embedding network.
void extract(const config::ExperimentConfig& cfg, const StageOptions& opt);

struct XvecTrainSummary {
  int epochs = 0;
  int best_epoch = 0;
  double val_loss = 0;
  double val_accuracy = 0;
};
XvecTrainSummary train_xvec(const config::ExperimentConfig& cfg,
                            const StageOptions& opt);

// Embeddings for every split with features on disk.
void extract_xvec(const config::ExperimentConfig& cfg,
                  const StageOptions& opt);

void fit_lda_stage(const config::ExperimentConfig& cfg,
                   const StageOptions& opt);

struct CmTrainSummary {
  int epochs = 0;
  int best_epoch = 0;
  double val_loss = 0;
  int input_dim = 0;
};
CmTrainSummary train_cm(const config::ExperimentConfig& cfg,
                        const StageOptions& opt);

// Countermeasure scores for one split -> scores file.
void score(const config::ExperimentConfig& cfg, const std::string& split,
           const StageOptions& opt);

struct EvalResult {
  double eer = 0;       // fraction in [0, 1]
  double min_tdcf = 0;  // normalized
  int n_bona = 0;
  int n_spoof = 0;
  // The two lines printed by the eval subcommand, e.g. "EER 7.74%".
  std::string eer_line;
  std::string tdcf_line;
};
EvalResult evaluate(const config::ExperimentConfig& cfg,
                    const std::string& split, const StageOptions& opt);

struct AnalyzeResult {
  std::vector<std::string> attack_ids; // confusion row/column order
  std::vector<std::string> env_ids;
  MatF attack_confusion;
  MatF env_confusion;
  emb::GroupingStrength strength;
  std::string report; // the text grids written to the analysis file
};
AnalyzeResult analyze(const config::ExperimentConfig& cfg,
                      const StageOptions& opt);

}  // namespace rd::pipeline
