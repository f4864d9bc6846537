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

#include "rd/features.hpp"

#include <algorithm>
#include <cmath>

namespace rd::feat {
namespace {

dsp::FilterbankKind bank_kind(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kMfcc:
    case FeatureKind::kMfccWide:
    case FeatureKind::kScmc:  // band summaries over mel-spaced sub-bands
      return dsp::FilterbankKind::kMel;
    case FeatureKind::kImfcc:
      return dsp::FilterbankKind::kInvertedMel;
    case FeatureKind::kRfcc:
      return dsp::FilterbankKind::kRectangular;
    case FeatureKind::kLfcc:
      return dsp::FilterbankKind::kLinear;
    case FeatureKind::kCqcc:
      break;
  }
  throw DataError("feature kind has no filterbank");
}

MatD floored_log(const MatD& m) {
  return m.cwiseMax(dsp::kLogFloor).array().log().matrix();
}

}  // namespace

FeatureConfig default_config(FeatureKind kind) {
  FeatureConfig c;
  c.kind = kind;
  switch (kind) {
    case FeatureKind::kMfcc:
      c.n_coeffs = 70; c.f_min = 300; c.f_max = 8000; break;
    case FeatureKind::kImfcc:
      c.n_coeffs = 60; c.f_min = 200; c.f_max = 8000; break;
    case FeatureKind::kRfcc:
      c.n_coeffs = 30; c.f_min = 200; c.f_max = 8000; break;
    case FeatureKind::kLfcc:
      c.n_coeffs = 70; c.f_min = 100; c.f_max = 7800; break;
    case FeatureKind::kScmc:
      c.n_coeffs = 40; c.f_min = 100; c.f_max = 8000; break;
    case FeatureKind::kCqcc:
      c.n_coeffs = 50; c.f_min = 15.62; c.f_max = 8000; break;
    case FeatureKind::kMfccWide:
      c.n_coeffs = 40; c.f_min = 0; c.f_max = 8000;
      c.n_bands = 80;
      c.mean_normalize = true;
      return c;
  }
  c.n_bands = c.n_coeffs;
  return c;
}

const char* kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kMfcc: return "mfcc";
    case FeatureKind::kImfcc: return "imfcc";
    case FeatureKind::kRfcc: return "rfcc";
    case FeatureKind::kLfcc: return "lfcc";
    case FeatureKind::kScmc: return "scmc";
    case FeatureKind::kCqcc: return "cqcc";
    case FeatureKind::kMfccWide: return "mfcc-wide";
  }
  return "?";
}

FeatureKind parse_kind(const std::string& name) {
  for (FeatureKind k : {FeatureKind::kMfcc, FeatureKind::kImfcc,
                        FeatureKind::kRfcc, FeatureKind::kLfcc,
                        FeatureKind::kScmc, FeatureKind::kCqcc,
                        FeatureKind::kMfccWide}) {
    if (name == kind_name(k)) return k;
  }
  throw UsageError("unknown feature kind: " + name);
}

MatD band_mean_magnitudes(const dsp::Spectrogram& spec,
                          const dsp::Filterbank& fb) {
  if (spec.magnitudes.cols() != fb.weights.cols())
    throw DataError("spectrogram bins do not match filterbank bins");
  // Weight every bin by its frequency, then normalize per band by the same
  // weights so a flat spectrum reproduces its amplitude in every band.
  const MatD wf = fb.weights.array().rowwise() *
                  spec.bin_freqs.transpose().array();
  const VecD denom = wf.rowwise().sum();
  if (denom.minCoeff() <= 0)
    throw DataError("band with zero frequency weight; cannot form mean magnitude");
  const MatD num = spec.magnitudes * wf.transpose();  // frames x bands
  return num.array().rowwise() / denom.transpose().array();
}

FeatureMatrix extract(const Waveform& w, const FeatureConfig& cfg) {
  if (cfg.n_coeffs < 1) throw DataError("n_coeffs must be positive");

  MatD cepstra;  // frames x n_coeffs
  if (cfg.kind == FeatureKind::kCqcc) {
    dsp::Spectrogram spec =
        dsp::cqt(w, cfg.f_min, cfg.f_max, cfg.bins_per_octave, cfg.frame.frame_shift);
    // Geometric bins -> uniform grid, then cepstrum.  The grid is twice
    // octaves * bins_per_octave so the resample never loses resolution.
    const int octaves = dsp::cqt_octaves(cfg.f_min, cfg.f_max);
    const int grid = 2 * octaves * cfg.bins_per_octave;
    if (cfg.n_coeffs > grid)
      throw DataError("n_coeffs exceeds the constant-Q resample grid");
    const MatD logmag = spec.magnitudes.cwiseMax(dsp::kLogFloor).array().log().matrix();
    MatD uniform(logmag.rows(), grid);
    for (int i = 0; i < logmag.rows(); ++i)
      uniform.row(i) = dsp::fft_resample(logmag.row(i).transpose(), grid).transpose();
    cepstra = dsp::dct2(uniform, cfg.n_coeffs);
  } else {
    if (cfg.n_coeffs > cfg.n_bands)
      throw DataError("n_coeffs " + std::to_string(cfg.n_coeffs) +
                      " exceeds n_bands " + std::to_string(cfg.n_bands));
    const MatD frames = dsp::frame_and_window(w, cfg.frame);
    const dsp::Spectrogram spec = dsp::power_spectrum(
        frames, cfg.frame.fft_size, w.sample_rate, cfg.frame.frame_shift);
    const dsp::Filterbank fb =
        dsp::make_filterbank(bank_kind(cfg.kind), cfg.n_bands, cfg.f_min,
                             cfg.f_max, w.sample_rate, cfg.frame.fft_size);
    MatD band_values;
    if (cfg.kind == FeatureKind::kScmc) {
      band_values = band_mean_magnitudes(spec, fb);
    } else {
      band_values = spec.magnitudes * fb.weights.transpose();
    }
    cepstra = dsp::dct2(floored_log(band_values), cfg.n_coeffs);
  }

  FeatureMatrix f;
  f.kind = cfg.kind;
  f.values = cepstra.transpose().cast<float>();
  if (cfg.mean_normalize && f.n_frames() > 0) {
    const VecF mean = f.values.rowwise().mean();
    f.values.colwise() -= mean;
  }
  return f;
}

FeatureMatrix downsample_frames(const FeatureMatrix& f, int m_prime) {
  if (m_prime < 1) throw DataError("downsample target must be >= 1 frame");
  if (f.n_frames() < 1) throw DataError("cannot downsample an empty feature matrix");

  FeatureMatrix out;
  out.kind = f.kind;
  out.utterance_id = f.utterance_id;
  if (f.n_frames() == m_prime) {
    out.values = f.values;
    return out;
  }
  out.values.resize(f.n_coeffs(), m_prime);
  for (int n = 0; n < f.n_coeffs(); ++n) {
    const VecD row = f.values.row(n).transpose().cast<double>();
    out.values.row(n) = dsp::fft_resample(row, m_prime).transpose().cast<float>();
  }
  return out;
}

VecF stack_frames(const FeatureMatrix& f) {
  const int n = f.n_coeffs(), m = f.n_frames();
  if (n < 1 || m < 1) throw DataError("cannot stack an empty feature matrix");
  VecF v(static_cast<Eigen::Index>(n) * m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) v[static_cast<Eigen::Index>(j) * n + i] = f.values(i, j);
  return v;
}

MatF unstack_frames(const VecF& v, int n_coeffs) {
  if (n_coeffs < 1 || v.size() % n_coeffs != 0)
    throw DataError("stacked length is not a multiple of the coefficient count");
  const int m = static_cast<int>(v.size()) / n_coeffs;
  MatF f(n_coeffs, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n_coeffs; ++i) f(i, j) = v[static_cast<Eigen::Index>(j) * n_coeffs + i];
  return f;
}

Rescaler fit_rescaler(const std::vector<VecF>& training_vectors) {
  if (training_vectors.empty())
    throw DataError("cannot fit a rescaler on an empty training set");
  const Eigen::Index dim = training_vectors.front().size();
  Rescaler r;
  r.max_abs = VecF::Zero(dim);
  for (const VecF& v : training_vectors) {
    if (v.size() != dim)
      throw DataError("rescaler training vectors disagree on dimension");
    r.max_abs = r.max_abs.cwiseMax(v.cwiseAbs());
  }
  for (Eigen::Index i = 0; i < dim; ++i)
    if (r.max_abs[i] == 0.0f) r.max_abs[i] = 1.0f;
  return r;
}

VecF Rescaler::apply(const VecF& v) const {
  if (v.size() != max_abs.size())
    throw DataError("rescaler dimension mismatch: vector has " +
                    std::to_string(v.size()) + " dims, rescaler has " +
                    std::to_string(max_abs.size()));
  return v.cwiseQuotient(max_abs);
}

VecF concat_embedding(const VecF& v, const VecF& embedding, float c) {
  VecF out(v.size() + embedding.size());
  out.head(v.size()) = v;
  out.tail(embedding.size()) = c * embedding;
  return out;
}

}  // namespace rd::feat
