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

#include "rd/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace rd::dsp {
namespace {

using Cplx = std::complex<double>;

VecD make_window(Window kind, int n) {
  VecD w(n);
  switch (kind) {
    case Window::kRectangular:
      w.setOnes();
      break;
    case Window::kHamming:
      for (int i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (n - 1));
      break;
    case Window::kHann:
      for (int i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n - 1));
      break;
  }
  return w;
}

// One engine per thread: Eigen::FFT caches its kissfft plans per instance,
// and the twiddle tables dominate the cost of short transforms otherwise.
Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

std::vector<Cplx> fft_forward(const std::vector<Cplx>& in) {
  if (in.size() <= 1) return in;  // the backend faults on length-1 plans
  std::vector<Cplx> out;
  fft_engine().fwd(out, in);
  return out;
}

std::vector<Cplx> fft_inverse(const std::vector<Cplx>& in) {
  if (in.size() <= 1) return in;
  std::vector<Cplx> out;
  fft_engine().inv(out, in);
  return out;
}

}  // namespace

int frame_count(int n_samples, int frame_samples, int shift_samples) {
  if (frame_samples < 2 || shift_samples < 1)
    throw DataError("invalid framing: frame=" + std::to_string(frame_samples) +
                    " shift=" + std::to_string(shift_samples) + " samples");
  if (n_samples < frame_samples)
    throw DataError("signal too short for one frame: " +
                    std::to_string(n_samples) + " < " +
                    std::to_string(frame_samples) + " samples");
  return (n_samples - frame_samples) / shift_samples + 1;
}

MatD frame_and_window(const Waveform& w, const FrameParams& p) {
  if (p.frame_len <= 0 || p.frame_shift <= 0)
    throw DataError("frame length and shift must be positive");
  const int frame_samples = static_cast<int>(std::lround(p.frame_len * w.sample_rate));
  const int shift_samples = static_cast<int>(std::lround(p.frame_shift * w.sample_rate));
  const int n = static_cast<int>(w.samples.size());
  const int m = frame_count(n, frame_samples, shift_samples);

  VecD x = w.samples.cast<double>();
  if (p.preemphasis > 0) {
    VecD y(n);
    y[0] = x[0];
    for (int i = 1; i < n; ++i) y[i] = x[i] - p.preemphasis * x[i - 1];
    x = y;
  }

  const VecD win = make_window(p.window, frame_samples);
  MatD frames(m, frame_samples);
  for (int i = 0; i < m; ++i)
    frames.row(i) = x.segment(static_cast<Eigen::Index>(i) * shift_samples,
                              frame_samples).cwiseProduct(win).transpose();
  return frames;
}

Spectrogram power_spectrum(const MatD& frames, int fft_size, int sample_rate,
                           double frame_shift) {
  if (fft_size < 2 || (fft_size & 1))
    throw DataError("fft_size must be even and >= 2");
  if (frames.cols() > fft_size)
    throw DataError("fft_size " + std::to_string(fft_size) +
                    " smaller than frame length " + std::to_string(frames.cols()));

  const int m = static_cast<int>(frames.rows());
  const int bins = fft_size / 2 + 1;

  Spectrogram s;
  s.frame_shift = frame_shift;
  s.magnitudes.resize(m, bins);
  s.bin_freqs.resize(bins);
  for (int k = 0; k < bins; ++k)
    s.bin_freqs[k] = static_cast<double>(k) * sample_rate / fft_size;

  std::vector<Cplx> buf(fft_size);
  for (int i = 0; i < m; ++i) {
    std::fill(buf.begin(), buf.end(), Cplx(0, 0));
    for (int j = 0; j < frames.cols(); ++j) buf[j] = Cplx(frames(i, j), 0);
    std::vector<Cplx> spec = fft_forward(buf);
    for (int k = 0; k < bins; ++k) s.magnitudes(i, k) = std::abs(spec[k]);
  }
  return s;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Filterbank make_filterbank(FilterbankKind kind, int n_bands, double f_min,
                           double f_max, int sample_rate, int fft_size) {
  if (n_bands < 1) throw DataError("filterbank needs at least one band");
  const double nyquist = sample_rate / 2.0;
  if (f_min < 0 || f_min >= f_max || f_max > nyquist + 1e-9)
    throw DataError("invalid filterbank range [" + std::to_string(f_min) + ", " +
                    std::to_string(f_max) + "] Hz at " +
                    std::to_string(sample_rate) + " Hz sampling");
  const int bins = fft_size / 2 + 1;

  Filterbank fb;
  fb.kind = kind;
  fb.f_min = f_min;
  fb.f_max = f_max;
  fb.weights = MatD::Zero(n_bands, bins);
  fb.lows.resize(n_bands);
  fb.centers.resize(n_bands);
  fb.highs.resize(n_bands);

  VecD bin_freq(bins);
  for (int k = 0; k < bins; ++k)
    bin_freq[k] = static_cast<double>(k) * sample_rate / fft_size;

  if (kind == FilterbankKind::kRectangular) {
    const double width = (f_max - f_min) / n_bands;
    for (int j = 0; j < n_bands; ++j) {
      const double lo = f_min + j * width;
      const double hi = lo + width;
      fb.lows[j] = lo;
      fb.highs[j] = hi;
      fb.centers[j] = 0.5 * (lo + hi);
      for (int k = 0; k < bins; ++k) {
        const double f = bin_freq[k];
        // Half-open bands; the last one keeps its upper edge so f_max lands
        // inside the bank.
        if (f >= lo && (f < hi || (j == n_bands - 1 && f <= hi)))
          fb.weights(j, k) = 1.0;
      }
    }
  } else {
    // Triangle edge grid: n_bands + 2 points; band j rises over
    // [edge_j, edge_j+1] and falls over [edge_j+1, edge_j+2].
    VecD edges(n_bands + 2);
    if (kind == FilterbankKind::kLinear) {
      for (int i = 0; i < n_bands + 2; ++i)
        edges[i] = f_min + (f_max - f_min) * i / (n_bands + 1);
    } else {
      const double m_lo = hz_to_mel(f_min), m_hi = hz_to_mel(f_max);
      VecD mel_edges(n_bands + 2);
      for (int i = 0; i < n_bands + 2; ++i)
        mel_edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * i / (n_bands + 1));
      if (kind == FilterbankKind::kMel) {
        edges = mel_edges;
      } else {
        // Inverted mel: reflect every mel edge across the band limits, so the
        // resolution profile runs dense-at-the-top instead.
        for (int i = 0; i < n_bands + 2; ++i)
          edges[i] = f_min + f_max - mel_edges[n_bands + 1 - i];
      }
    }
    for (int j = 0; j < n_bands; ++j) {
      const double lo = edges[j], c = edges[j + 1], hi = edges[j + 2];
      fb.lows[j] = lo;
      fb.centers[j] = c;
      fb.highs[j] = hi;
      if (c - lo <= 0 || hi - c <= 0)
        throw DataError("degenerate filterbank band " + std::to_string(j));
      for (int k = 0; k < bins; ++k) {
        const double f = bin_freq[k];
        if (f > lo && f < c)
          fb.weights(j, k) = (f - lo) / (c - lo);
        else if (f >= c && f < hi)
          fb.weights(j, k) = (hi - f) / (hi - c);
      }
    }
  }

  for (int j = 0; j < n_bands; ++j) {
    if (fb.weights.row(j).maxCoeff() <= 0)
      throw DataError(std::string(filterbank_kind_name(kind)) + " band " +
                      std::to_string(j) + " catches no FFT bin; " +
                      "increase fft_size or widen the band");
  }
  return fb;
}

MatD dct2_matrix(int n) {
  if (n < 1) throw DataError("DCT size must be positive");
  MatD c(n, n);
  const double s0 = std::sqrt(1.0 / n), sk = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      c(k, i) = (k == 0 ? s0 : sk) * std::cos(M_PI * (i + 0.5) * k / n);
  return c;
}

MatD dct2(const MatD& band_values, int n_coeffs) {
  const int n = static_cast<int>(band_values.cols());
  if (n_coeffs < 1 || n_coeffs > n)
    throw DataError("requested " + std::to_string(n_coeffs) +
                    " DCT coefficients from " + std::to_string(n) + " bands");
  const MatD basis = dct2_matrix(n);
  return band_values * basis.topRows(n_coeffs).transpose();
}

int cqt_octaves(double f_min, double f_max) {
  if (f_min <= 0 || f_max <= f_min)
    throw DataError("invalid constant-Q range");
  return static_cast<int>(std::floor(std::log2(f_max / f_min) + 1e-9));
}

Spectrogram cqt(const Waveform& w, double f_min, double f_max,
                int bins_per_octave, double frame_shift) {
  if (bins_per_octave < 1) throw DataError("bins_per_octave must be positive");
  const double nyquist = w.sample_rate / 2.0;
  if (f_min <= 0 || f_max <= f_min || f_max > nyquist + 1e-9)
    throw DataError("invalid constant-Q range [" + std::to_string(f_min) +
                    ", " + std::to_string(f_max) + "] Hz");
  const int n = static_cast<int>(w.samples.size());
  const int hop = static_cast<int>(std::lround(frame_shift * w.sample_rate));
  if (hop < 1) throw DataError("frame shift too small");
  if (n < 2) throw DataError("signal too short for constant-Q analysis");

  const int n_bins =
      static_cast<int>(std::floor(bins_per_octave * std::log2(f_max / f_min) + 1e-9)) + 1;
  const double q = 1.0 / (std::pow(2.0, 1.0 / bins_per_octave) - 1.0);

  // One complex kernel per bin: Hann window times the bin's phasor.
  std::vector<std::vector<Cplx>> kernels(n_bins);
  std::vector<VecD> windows(n_bins);
  VecD freqs(n_bins);
  for (int k = 0; k < n_bins; ++k) {
    const double fk = f_min * std::pow(2.0, static_cast<double>(k) / bins_per_octave);
    freqs[k] = fk;
    int nk = static_cast<int>(std::lround(q * w.sample_rate / fk));
    nk = std::clamp(nk, 2, n);
    VecD win = make_window(Window::kHann, nk);
    kernels[k].resize(nk);
    const double omega = 2.0 * M_PI * fk / w.sample_rate;
    for (int i = 0; i < nk; ++i)
      kernels[k][i] = win[i] * std::exp(Cplx(0, -omega * i));
    windows[k] = win;
  }

  const int m = (n - 1) / hop + 1;  // frames start at 0, hop, ... while < n
  Spectrogram s;
  s.frame_shift = frame_shift;
  s.bin_freqs = freqs;
  s.magnitudes.resize(m, n_bins);

  const VecD x = w.samples.cast<double>();
  for (int i = 0; i < m; ++i) {
    const int t0 = i * hop;
    for (int k = 0; k < n_bins; ++k) {
      const int nk = static_cast<int>(kernels[k].size());
      const int used = std::min(nk, n - t0);
      Cplx acc(0, 0);
      double wsum = 0;
      for (int j = 0; j < used; ++j) {
        acc += x[t0 + j] * kernels[k][j];
        wsum += windows[k][j];
      }
      s.magnitudes(i, k) = wsum > 0 ? std::abs(acc) * 2.0 / wsum : 0.0;
    }
  }
  return s;
}

VecD fft_resample(const VecD& x, int target_len) {
  const int m = static_cast<int>(x.size());
  if (target_len < 1)
    throw DataError("resample target must have at least one point");
  if (m < 1) throw DataError("cannot resample an empty sequence");
  if (target_len == m) return x;

  std::vector<Cplx> in(m);
  for (int i = 0; i < m; ++i) in[i] = Cplx(x[i], 0);
  std::vector<Cplx> spec = fft_forward(in);

  const int t = target_len;
  std::vector<Cplx> out_spec(t, Cplx(0, 0));
  out_spec[0] = spec[0];
  if (t < m) {
    for (int k = 1; k < (t + 1) / 2; ++k) {
      out_spec[k] = spec[k];
      out_spec[t - k] = spec[m - k];
    }
    if (t % 2 == 0 && t >= 2)
      // The folded bin collects the +/- components that now alias together.
      out_spec[t / 2] = spec[t / 2] + spec[m - t / 2];
  } else {
    for (int k = 1; k < (m + 1) / 2; ++k) {
      out_spec[k] = spec[k];
      out_spec[t - k] = spec[m - k];
    }
    if (m % 2 == 0)
      // Split the old Nyquist bin symmetrically.
      out_spec[m / 2] = out_spec[t - m / 2] = 0.5 * spec[m / 2];
  }

  std::vector<Cplx> y = fft_inverse(out_spec);
  const double scale = static_cast<double>(t) / m;
  VecD out(t);
  for (int i = 0; i < t; ++i) out[i] = y[i].real() * scale;
  return out;
}

VecD fft_convolve(const VecD& a, const VecD& b) {
  if (a.size() == 0 || b.size() == 0)
    throw DataError("cannot convolve empty sequences");
  const int la = static_cast<int>(a.size()), lb = static_cast<int>(b.size());
  const int lc = la + lb - 1;
  int nfft = 1;
  while (nfft < lc) nfft <<= 1;

  std::vector<Cplx> fa(nfft, Cplx(0, 0)), fb(nfft, Cplx(0, 0));
  for (int i = 0; i < la; ++i) fa[i] = Cplx(a[i], 0);
  for (int i = 0; i < lb; ++i) fb[i] = Cplx(b[i], 0);
  std::vector<Cplx> sa = fft_forward(fa), sb = fft_forward(fb);
  for (int i = 0; i < nfft; ++i) sa[i] *= sb[i];
  std::vector<Cplx> y = fft_inverse(sa);

  VecD out(lc);
  for (int i = 0; i < lc; ++i) out[i] = y[i].real();
  return out;
}

VecF fft_convolve(const VecF& a, const VecF& b) {
  const VecD y = fft_convolve(VecD(a.cast<double>()), VecD(b.cast<double>()));
  return y.cast<float>();
}

std::vector<Cplx> fft(const std::vector<Cplx>& in, bool inverse) {
  return inverse ? fft_inverse(in) : fft_forward(in);
}

const char* filterbank_kind_name(FilterbankKind kind) {
  switch (kind) {
    case FilterbankKind::kMel: return "mel";
    case FilterbankKind::kInvertedMel: return "inverted-mel";
    case FilterbankKind::kLinear: return "linear";
    case FilterbankKind::kRectangular: return "rectangular";
  }
  return "?";
}

}  // namespace rd::dsp
