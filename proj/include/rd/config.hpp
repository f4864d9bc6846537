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
// Experiment configuration: one key = value file with [sections], a typed
// schema with defaults, command-line overrides, and an FNV-1a fingerprint
// that binds artifacts to the configuration that produced them.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rd/common.hpp"
#include "rd/embedder.hpp"
#include "rd/features.hpp"
#include "rd/metrics.hpp"
#include "rd/simcorpus.hpp"

namespace rd::config {

// Which inputs feed the countermeasure.
enum class CmInputs { kCombined, kFeaturesOnly, kXvecOnly };

const char* cm_inputs_name(CmInputs v);
CmInputs parse_cm_inputs(const std::string& name);

// The full experiment surface.  Defaults reproduce the reference system:
// SCMC signal features + 0.1-scaled 10-dim LDA x-vectors, countermeasure
// noise std 0.001, Adam lr 0.001, patience 5.
struct ExperimentConfig {
  std::optional<std::uint64_t> seed; // required before any random stage
  int threads = 1;                   // worker cap; never affects results

  struct Paths {
    std::string corpus_dir = "corpus";
    std::string work_dir = "work";
  } paths;

  struct Corpus {
    int n_train = 2700;
    int n_dev = 900;
    int n_eval = 900;
    double bona_fraction = 0.1;
  } corpus;

  struct Features {
    std::string kind = "scmc"; // mfcc|imfcc|rfcc|lfcc|scmc|cqcc
    int n_coeffs = 0;          // 0 = per-kind default
    int n_bands = 0;           // 0 = follow n_coeffs
    double f_min = -1;         // negative = per-kind default
    double f_max = -1;
    int downsample_frames = 10;
  } features;

  struct Xvec {
    bool full_scale = false; // 512/1500/512 layer widths instead of desk scale
    int frame_units = 64;
    int stats_units = 128;
    int segment_units = 64;
    int chunk_frames = 100;
    int epochs = 12;
    int batch_size = 64;
    double learning_rate = 0.001;
    int patience = 5;
    double l2 = 0.0001;
    int lda_dim = 10;
    double lda_reg = 0.0001;
    double scale_c = 0.1; // weight on the appended embedding
  } xvec;

  struct Cm {
    std::string inputs = "combined"; // combined|features|xvec
    bool noise_layer = true;
    double noise_std = 0.001;
    int filters = 32;
    int kernel = 3;
    double l2 = 0.0001;
    int epochs = 30;
    int batch_size = 64;
    double learning_rate = 0.001;
    int patience = 5;
  } cm;

  struct Metrics {
    double p_target = 0.9405;
    double p_nontarget = 0.0095;
    double p_spoof = 0.05;
    double c_miss_asv = 1;
    double c_fa_asv = 10;
    double c_miss_cm = 1;
    double c_fa_cm = 10;
  } metrics;

  // Fingerprint over every result-affecting key (paths and threads are
  // excluded).  Stamped into artifact headers; stages refuse mismatched
  // inputs unless forced.
  std::uint64_t hash() const;

  std::uint64_t require_seed() const; // UsageError when unset
};

// One schema row: dotted name, help line, whether the key participates in
// the fingerprint, and typed accessors.
struct KeyDef {
  const char* name;
  const char* help;
  bool hashed;
  std::string (*get)(const ExperimentConfig&);
  void (*set)(ExperimentConfig&, const std::string&);
};

const std::vector<KeyDef>& schema();

// Parses `key = value` lines with [section] headers and '#' comments into
// cfg.  Unknown keys and malformed values raise UsageError.
void parse_config_text(const std::string& text, ExperimentConfig* cfg);

// Defaults + the given file.
ExperimentConfig load_config_file(const std::string& path);

// Applies one "section.key=value" assignment (the --set flag).
void apply_override(ExperimentConfig* cfg, const std::string& assignment);

// Canonical reloadable dump, grouped by section, one key per line.
std::string dump_config(const ExperimentConfig& cfg);

// "name = default  help" table for --help output.
std::string describe_keys();

// Range and enum checks beyond per-key parsing; UsageError on violation.
void validate(const ExperimentConfig& cfg);

// ---- Stage-facing views -------------------------------------------------

// The classifier front-end with config overrides applied.
feat::FeatureConfig feature_config(const ExperimentConfig& cfg);

// The fixed wide-band MFCC front-end feeding the embedding network.
feat::FeatureConfig embedding_feature_config(const ExperimentConfig& cfg);

sim::CorpusSpec corpus_spec(const ExperimentConfig& cfg);

emb::TdnnConfig tdnn_config(const ExperimentConfig& cfg, int n_classes);

metrics::TdcfParams tdcf_params(const ExperimentConfig& cfg);

}  // namespace rd::config
