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
// On-disk artifacts: feature archives (RDFEAT01), x-vector archives
// (RDXVEC01), and the small text files (rescaler, scores, trial keys,
// training history).  Every binary header carries the experiment config
// hash so downstream stages can refuse mismatched inputs.  Nothing here
// writes timestamps; rerunning a stage reproduces files byte for byte.

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "rd/common.hpp"
#include "rd/features.hpp"

namespace rd::archive {

// ---------------------------------------------------------------------------
// Feature archives.  The header fixes kind, coefficient count, and frame
// count; m_frames == 0 marks variable-length records, which then carry
// their own frame count.  Record payload is row-major float32.

struct FeatureArchiveHeader {
  feat::FeatureKind kind = feat::FeatureKind::kMfcc;
  int n_coeffs = 0;
  int m_frames = 0;  // 0 = per-record frame counts
  std::uint64_t count = 0;
  std::uint64_t config_hash = 0;
};

class FeatureArchiveWriter {
 public:
  FeatureArchiveWriter(const std::string& path, feat::FeatureKind kind,
                       int n_coeffs, int m_frames, std::uint64_t config_hash);
  ~FeatureArchiveWriter();

  FeatureArchiveWriter(const FeatureArchiveWriter&) = delete;
  FeatureArchiveWriter& operator=(const FeatureArchiveWriter&) = delete;

  void append(const feat::FeatureMatrix& f);
  // Patches the record count into the header.  Must be called; the
  // destructor only closes already-finalized writers cleanly.
  void close();

 private:
  std::ofstream os_;
  std::string path_;
  feat::FeatureKind kind_;
  int n_coeffs_, m_frames_;
  std::uint64_t count_ = 0;
  std::streampos count_pos_;
  bool closed_ = false;
};

FeatureArchiveHeader peek_feature_archive(const std::string& path);
std::vector<feat::FeatureMatrix> read_feature_archive(
    const std::string& path, FeatureArchiveHeader* header = nullptr);

// ---------------------------------------------------------------------------
// X-vector archives: one fixed-dimension float vector per utterance plus
// the joint label it was trained against.

struct XvecRecord {
  std::string utt_id;
  std::string label;
  VecF vec;
};

struct XvecArchive {
  int dim = 0;
  std::uint64_t config_hash = 0;
  std::vector<XvecRecord> records;
};

void write_xvec_archive(const std::string& path, const XvecArchive& a);
XvecArchive read_xvec_archive(const std::string& path);

// ---------------------------------------------------------------------------
// Text artifacts.  Rescalers and scores open with a "# config <hex>" line;
// their loaders hand the parsed hash back (0 when absent).

// Rescaler: one max-abs value per line.
void save_rescaler(const std::string& path, const feat::Rescaler& r,
                   std::uint64_t config_hash);
feat::Rescaler load_rescaler(const std::string& path,
                             std::uint64_t* config_hash = nullptr);

// Scores: "utt_id score" with six decimals, one line per trial.
void save_scores(const std::string& path,
                 const std::vector<std::pair<std::string, double>>& scores,
                 std::uint64_t config_hash);
std::vector<std::pair<std::string, double>> load_scores(
    const std::string& path, std::uint64_t* config_hash = nullptr);

// Keys: "utt_id label" (e.g. bonafide/spoof or an attack id).
void save_key(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& key);
std::vector<std::pair<std::string, std::string>> load_key(
    const std::string& path);

// Training history: one "epoch train_loss val_loss" line per epoch.
void save_history(
    const std::string& path,
    const std::vector<std::tuple<int, double, double>>& history);

}  // namespace rd::archive
