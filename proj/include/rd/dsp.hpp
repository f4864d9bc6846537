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

#include <complex>
#include <string>
#include <vector>

#include "rd/common.hpp"
#include "rd/wav.hpp"

namespace rd::dsp {

// Floor applied before any log of a spectral energy.
constexpr double kLogFloor = 1e-10;

enum class Window { kRectangular, kHamming, kHann };

// Short-time analysis parameters.  25 ms / 10 ms / Hamming at 16 kHz are the
// working defaults; fft_size must hold a full frame.  Pre-emphasis is off by
// default and kept as an explicit knob.
struct FrameParams {
  double frame_len = 0.025;   // seconds
  double frame_shift = 0.010; // seconds
  Window window = Window::kHamming;
  int fft_size = 512;
  double preemphasis = 0.0;   // y[n] = x[n] - a*x[n-1] when a > 0
};

// Number of frames produced for a given signal length:
//   floor((len - frame_samples) / shift_samples) + 1.
// Throws DataError when the signal is shorter than one frame.
int frame_count(int n_samples, int frame_samples, int shift_samples);

// Slices the signal into overlapping frames and applies the window.
// Output is frames x frame_samples.
MatD frame_and_window(const Waveform& w, const FrameParams& p);

// Magnitude spectra over time.
struct Spectrogram {
  MatD magnitudes;     // frames x bins, all >= 0
  VecD bin_freqs;      // Hz, strictly increasing, bins entries
  double frame_shift;  // seconds between frames
};

// Per-frame magnitude of the FFT of each (zero-padded) windowed frame.
// bins = fft_size / 2 + 1, covering 0 .. sample_rate/2.
Spectrogram power_spectrum(const MatD& frames, int fft_size, int sample_rate,
                           double frame_shift);

enum class FilterbankKind { kMel, kInvertedMel, kLinear, kRectangular };

// Bank of spectral weighting curves over FFT bins.
struct Filterbank {
  MatD weights;  // bands x bins, non-negative
  FilterbankKind kind = FilterbankKind::kMel;
  double f_min = 0, f_max = 0;
  VecD lows, centers, highs;  // per-band support in Hz, centers increasing
};

// mel(f) = 2595 * log10(1 + f/700) and its inverse.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Builds a filterbank over the FFT bin grid:
//  - kMel:         triangles with centers equally spaced on the mel scale
//  - kInvertedMel: mel triangles mirrored across [f_min, f_max]
//  - kLinear:      triangles equally spaced in Hz
//  - kRectangular: non-overlapping unit boxcars of equal width
// Every band must catch at least one strictly positive bin weight; a band
// that would be silent at this FFT resolution raises DataError.
Filterbank make_filterbank(FilterbankKind kind, int n_bands, double f_min,
                           double f_max, int sample_rate, int fft_size);

// Orthonormal DCT-II basis, n x n; row k is the k-th cosine.
MatD dct2_matrix(int n);

// DCT-II of each row (frames x bands -> frames x n_coeffs, truncated).
MatD dct2(const MatD& band_values, int n_coeffs);

// Number of whole octaves between f_min and f_max.
int cqt_octaves(double f_min, double f_max);

// Constant-Q magnitudes: geometrically spaced bins f_min * 2^(k/bpo), one
// windowed DFT per bin per frame, hop = frame_shift.  Kernel lengths follow
// Q = 1/(2^(1/bpo) - 1) and are clipped to the signal.
Spectrogram cqt(const Waveform& w, double f_min, double f_max,
                int bins_per_octave, double frame_shift = 0.010);

// Fourier-domain resampling of x to target_len points.  Keeps the DC bin
// (and therefore the mean) exact; target_len == len(x) is the identity.
VecD fft_resample(const VecD& x, int target_len);

// Full linear convolution via FFT, length a+b-1.
VecD fft_convolve(const VecD& a, const VecD& b);
VecF fft_convolve(const VecF& a, const VecF& b);  // computes in double

// Complex DFT of arbitrary length; inverse includes the 1/N scaling.
std::vector<std::complex<double>> fft(
    const std::vector<std::complex<double>>& in, bool inverse);

const char* filterbank_kind_name(FilterbankKind kind);

}  // namespace rd::dsp
