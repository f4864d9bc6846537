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

#pragma once

#include <string>
#include <vector>

#include "rd/dsp.hpp"

namespace rd::feat {

// Cepstral front-end families.  kMfccWide is the 40-coefficient, 80-band,
// full-range variant consumed by the embedding network; the others are the
// classifier front-ends.
enum class FeatureKind {
  kMfcc,
  kImfcc,
  kRfcc,
  kLfcc,
  kScmc,
  kCqcc,
  kMfccWide,
};

struct FeatureConfig {
  FeatureKind kind = FeatureKind::kScmc;
  int n_coeffs = 40;
  double f_min = 100, f_max = 8000;
  int n_bands = 40;            // filterbank size; ignored by kCqcc
  int bins_per_octave = 12;    // kCqcc only
  bool mean_normalize = false; // subtract per-coefficient mean over frames
  dsp::FrameParams frame;
};

// Per-kind defaults: coefficient count and band edges.  n_bands matches
// n_coeffs except for kMfccWide (80 bands -> 40 coefficients).
FeatureConfig default_config(FeatureKind kind);

const char* kind_name(FeatureKind kind);
FeatureKind parse_kind(const std::string& name);

// Static cepstra for one utterance: n_coeffs x n_frames, column = one frame.
struct FeatureMatrix {
  MatF values;
  FeatureKind kind = FeatureKind::kScmc;
  std::string utterance_id;

  int n_coeffs() const { return static_cast<int>(values.rows()); }
  int n_frames() const { return static_cast<int>(values.cols()); }
};

// Runs the configured front-end.  All kinds share the framing parameters in
// the config; kCqcc replaces the FFT analysis with the constant-Q transform.
FeatureMatrix extract(const Waveform& w, const FeatureConfig& cfg);

// Frequency-weighted mean magnitude per band:
//   m_j = sum_k w_j(k) f_k |S(k)| / sum_k w_j(k) f_k.
// A constant-magnitude spectrum comes back unchanged in every band; scaling
// the spectrum scales the summary linearly.  Exposed for direct testing.
MatD band_mean_magnitudes(const dsp::Spectrogram& spec,
                          const dsp::Filterbank& fb);

// Fourier resampling of each coefficient row to m_prime frames (default 10).
// Row means are preserved exactly; m_prime == n_frames is the identity.
FeatureMatrix downsample_frames(const FeatureMatrix& f, int m_prime = 10);

// Frame-major flattening: out[m * N + n] = f(n, m).
VecF stack_frames(const FeatureMatrix& f);

// Inverse of stack_frames given the coefficient count.
MatF unstack_frames(const VecF& v, int n_coeffs);

// Per-dimension max-absolute scaling fitted on training vectors.  Dimensions
// that are identically zero store 1.0 so application is always defined; no
// clamping happens at apply time, so unseen data may exceed [-1, +1].
struct Rescaler {
  VecF max_abs;

  VecF apply(const VecF& v) const;
};

Rescaler fit_rescaler(const std::vector<VecF>& training_vectors);

// Appends a scaled embedding: result = [v, c * embedding].
VecF concat_embedding(const VecF& v, const VecF& embedding, float c = 0.1f);

}  // namespace rd::feat
