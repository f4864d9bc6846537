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

#include <cmath>
#include <complex>

#include "doctest.h"
#include "oracles.hpp"
#include "rd/dsp.hpp"

using namespace rd;

namespace {

Waveform tone(double freq, double seconds, int sr, double amp = 1.0) {
  Waveform w;
  w.sample_rate = sr;
  const int n = static_cast<int>(std::lround(seconds * sr));
  w.samples.resize(n);
  for (int i = 0; i < n; ++i)
    w.samples[i] = static_cast<float>(amp * std::cos(2.0 * M_PI * freq * i / sr));
  return w;
}

}  // namespace

TEST_CASE("fft matches the direct DFT at awkward lengths") {
  Rng rng(1001);
  for (int n : {1, 2, 3, 5, 8, 12, 16, 37, 64, 100}) {
    std::vector<std::complex<double>> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = {rng.normal(), rng.normal()};

    auto got = dsp::fft(x, false);
    auto want = oracle::naive_dft(x, false);
    REQUIRE(got.size() == want.size());
    for (int k = 0; k < n; ++k)
      CHECK(std::abs(got[static_cast<std::size_t>(k)] -
                     want[static_cast<std::size_t>(k)]) < 1e-9);

    // Round trip: inverse(forward(x)) == x.
    auto back = dsp::fft(got, true);
    for (int k = 0; k < n; ++k)
      CHECK(std::abs(back[static_cast<std::size_t>(k)] -
                     x[static_cast<std::size_t>(k)]) < 1e-9);
  }
}

TEST_CASE("frame_count follows floor((n - frame) / shift) + 1") {
  CHECK(dsp::frame_count(16000, 400, 160) == 98);
  CHECK(dsp::frame_count(400, 400, 160) == 1);
  CHECK(dsp::frame_count(559, 400, 160) == 1);
  CHECK(dsp::frame_count(560, 400, 160) == 2);
  CHECK_THROWS_AS(dsp::frame_count(399, 400, 160), DataError);
}

TEST_CASE("frame_and_window slices and windows as documented") {
  Waveform w;
  w.sample_rate = 1000;
  w.samples.resize(100);
  for (int i = 0; i < 100; ++i) w.samples[i] = static_cast<float>(i);

  dsp::FrameParams p;
  p.frame_len = 0.020;   // 20 samples
  p.frame_shift = 0.010; // 10 samples
  p.window = dsp::Window::kRectangular;

  MatD f = dsp::frame_and_window(w, p);
  CHECK(f.rows() == 9);
  CHECK(f.cols() == 20);
  CHECK(f(0, 0) == 0.0);
  CHECK(f(0, 19) == 19.0);
  CHECK(f(3, 0) == 30.0);   // frame i starts at i * shift
  CHECK(f(8, 19) == 99.0);

  SUBCASE("Hamming endpoints and symmetry") {
    p.window = dsp::Window::kHamming;
    w.samples.setOnes();
    MatD h = dsp::frame_and_window(w, p);
    CHECK(h(0, 0) == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(h(0, 19) == doctest::Approx(0.08).epsilon(1e-12));
    for (int i = 0; i < 10; ++i)
      CHECK(h(0, i) == doctest::Approx(h(0, 19 - i)).epsilon(1e-12));
  }

  SUBCASE("pre-emphasis differences the signal before framing") {
    p.preemphasis = 0.97;
    MatD g = dsp::frame_and_window(w, p);
    // x[i] = i, so y[i] = i - 0.97 (i - 1) for i >= 1; frame 1 starts at
    // sample 10.
    CHECK(g(1, 0) == doctest::Approx(10.0 - 0.97 * 9.0).epsilon(1e-12));
    CHECK(g(0, 0) == 0.0);  // y[0] = x[0]
  }
}

TEST_CASE("power_spectrum localizes a bin-aligned tone") {
  const int sr = 16000;
  const int n_fft = 256;
  // Frame length equals fft_size so there is no zero padding, and the tone
  // frequency sits exactly on bin 32: f = 32 * 16000 / 256 = 2000 Hz.
  Waveform w = tone(2000.0, 0.1, sr);
  dsp::FrameParams p;
  p.frame_len = static_cast<double>(n_fft) / sr;
  p.frame_shift = 0.010;
  p.window = dsp::Window::kRectangular;
  p.fft_size = n_fft;

  MatD frames = dsp::frame_and_window(w, p);
  auto s = dsp::power_spectrum(frames, n_fft, sr, p.frame_shift);

  CHECK(s.magnitudes.cols() == n_fft / 2 + 1);
  CHECK(s.bin_freqs[0] == 0.0);
  CHECK(s.bin_freqs[n_fft / 2] == sr / 2.0);
  CHECK(s.frame_shift == p.frame_shift);

  // A unit cosine on an analysis grid of N points has |X[k]| = N/2 at its
  // bin and ~0 elsewhere.  Tolerances reflect the float storage of the
  // samples, not the transform itself.
  for (int fr = 0; fr < s.magnitudes.rows(); ++fr) {
    Eigen::Index peak = 0;
    s.magnitudes.row(fr).maxCoeff(&peak);
    CHECK(peak == 32);
    CHECK(s.magnitudes(fr, 32) == doctest::Approx(n_fft / 2.0).epsilon(1e-6));
    CHECK(s.magnitudes(fr, 40) < 1e-4);
  }

  SUBCASE("constant signal concentrates at DC") {
    Waveform dc;
    dc.sample_rate = sr;
    dc.samples = VecF::Ones(n_fft);
    MatD df = dsp::frame_and_window(dc, p);
    auto ds = dsp::power_spectrum(df, n_fft, sr, p.frame_shift);
    CHECK(ds.magnitudes(0, 0) == doctest::Approx(n_fft).epsilon(1e-12));
    CHECK(ds.magnitudes(0, 1) < 1e-9);
  }

  SUBCASE("zero padding is applied when the frame is shorter") {
    MatD one(1, 3);
    one << 1.0, 1.0, 1.0;
    auto zs = dsp::power_spectrum(one, 8, sr, 0.01);
    // DFT of [1,1,1,0,...,0] at DC is 3.
    CHECK(zs.magnitudes(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  }

  SUBCASE("frame longer than fft_size is rejected") {
    MatD big(1, 16);
    big.setOnes();
    CHECK_THROWS_AS(dsp::power_spectrum(big, 8, sr, 0.01), DataError);
  }
}

TEST_CASE("filterbank invariants hold for every kind") {
  const int sr = 16000;
  const int n_fft = 512;
  for (auto kind : {dsp::FilterbankKind::kMel, dsp::FilterbankKind::kInvertedMel,
                    dsp::FilterbankKind::kLinear,
                    dsp::FilterbankKind::kRectangular}) {
    CAPTURE(dsp::filterbank_kind_name(kind));
    auto fb = dsp::make_filterbank(kind, 24, 100.0, 7800.0, sr, n_fft);
    CHECK(fb.weights.rows() == 24);
    CHECK(fb.weights.cols() == n_fft / 2 + 1);
    CHECK(fb.weights.minCoeff() >= 0.0);
    for (int b = 0; b < 24; ++b) {
      CHECK(fb.weights.row(b).sum() > 0.0);  // no silent band
      if (b > 0) CHECK(fb.centers[b] > fb.centers[b - 1]);
      CHECK(fb.lows[b] < fb.highs[b]);
    }
  }
}

TEST_CASE("mel filterbank centers are equally spaced on the mel scale") {
  auto fb = dsp::make_filterbank(dsp::FilterbankKind::kMel, 20, 300.0, 8000.0,
                                 16000, 512);
  std::vector<double> mels;
  for (int b = 0; b < 20; ++b) mels.push_back(dsp::hz_to_mel(fb.centers[b]));
  const double step = mels[1] - mels[0];
  for (int b = 2; b < 20; ++b)
    CHECK(mels[static_cast<std::size_t>(b)] -
              mels[static_cast<std::size_t>(b - 1)] ==
          doctest::Approx(step).epsilon(1e-9));
  // Edges: first low and last high sit on the band limits.
  CHECK(fb.lows[0] == doctest::Approx(300.0));
  CHECK(fb.highs[19] == doctest::Approx(8000.0));
}

TEST_CASE("inverted-mel centers mirror mel centers across the band") {
  const double f_min = 200.0, f_max = 8000.0;
  auto mel = dsp::make_filterbank(dsp::FilterbankKind::kMel, 16, f_min, f_max,
                                  16000, 512);
  auto inv = dsp::make_filterbank(dsp::FilterbankKind::kInvertedMel, 16, f_min,
                                  f_max, 16000, 512);
  for (int b = 0; b < 16; ++b)
    CHECK(inv.centers[b] ==
          doctest::Approx(f_min + f_max - mel.centers[15 - b]).epsilon(1e-9));
  // Inverted mel is dense at the top of the band: spacing shrinks upward.
  CHECK(inv.centers[1] - inv.centers[0] > inv.centers[15] - inv.centers[14]);
}

TEST_CASE("rectangular bands partition the range with unit weights") {
  const int n_fft = 512, sr = 16000;
  auto fb = dsp::make_filterbank(dsp::FilterbankKind::kRectangular, 10, 200.0,
                                 8000.0, sr, n_fft);
  for (Eigen::Index i = 0; i < fb.weights.size(); ++i) {
    const double v = fb.weights.data()[i];
    CHECK((v == 0.0 || v == 1.0));
  }
  // Equal width bands; each in-range bin belongs to at most one band.
  const double width = (8000.0 - 200.0) / 10.0;
  for (int b = 0; b < 10; ++b)
    CHECK(fb.highs[b] - fb.lows[b] == doctest::Approx(width).epsilon(1e-9));
  VecD col_sums = fb.weights.colwise().sum();
  CHECK(col_sums.maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("a band too narrow for the FFT grid is rejected") {
  // 128 bands over 300 Hz at a 31.25 Hz bin spacing cannot all be non-silent.
  CHECK_THROWS_AS(dsp::make_filterbank(dsp::FilterbankKind::kMel, 128, 100.0,
                                       400.0, 16000, 512),
                  DataError);
}

TEST_CASE("dct2 matches the direct orthonormal transform") {
  Rng rng(77);
  MatD rows(3, 17);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = rng.normal();

  MatD c = dsp::dct2(rows, 9);
  CHECK(c.rows() == 3);
  CHECK(c.cols() == 9);
  for (int r = 0; r < 3; ++r) {
    std::vector<double> x(17);
    for (int i = 0; i < 17; ++i) x[static_cast<std::size_t>(i)] = rows(r, i);
    for (int k = 0; k < 9; ++k)
      CHECK(c(r, k) == doctest::Approx(oracle::naive_dct2(x, k)).epsilon(1e-12));
  }
}

TEST_CASE("dct2_matrix is orthonormal and maps constants to k = 0") {
  MatD d = dsp::dct2_matrix(12);
  MatD eye = d * d.transpose();
  CHECK((eye - MatD::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-12);

  VecD ones = VecD::Ones(12);
  VecD c = d * ones;
  CHECK(c[0] == doctest::Approx(std::sqrt(12.0)).epsilon(1e-12));
  for (int k = 1; k < 12; ++k) CHECK(std::abs(c[k]) < 1e-12);
}

TEST_CASE("cqt bins are geometric and localize a tone") {
  // f_min 100, 12 bins/octave, f_max 1600 -> 49 bins; 400 Hz sits exactly
  // on bin 24 (two octaves above f_min).
  Waveform w = tone(400.0, 0.5, 16000);
  auto s = dsp::cqt(w, 100.0, 1600.0, 12);
  CHECK(s.magnitudes.cols() == 49);
  CHECK(s.bin_freqs[0] == doctest::Approx(100.0));
  CHECK(s.bin_freqs[12] == doctest::Approx(200.0).epsilon(1e-12));
  CHECK(s.bin_freqs[48] == doctest::Approx(1600.0).epsilon(1e-12));

  VecD mean = s.magnitudes.colwise().mean();
  Eigen::Index peak = 0;
  mean.maxCoeff(&peak);
  CHECK(peak == 24);
  // The peak response of a unit tone is near unity after kernel
  // normalization.
  CHECK(mean[24] > 0.5);
  CHECK(mean[24] < 1.5);
}

TEST_CASE("cqt_octaves counts whole octaves") {
  CHECK(dsp::cqt_octaves(100.0, 1600.0) == 4);
  CHECK(dsp::cqt_octaves(15.62, 8000.0) == 9);
  CHECK(dsp::cqt_octaves(100.0, 199.0) == 0);
}

TEST_CASE("fft_resample keeps the mean exactly and is the identity at M = N") {
  Rng rng(31);
  for (int n : {37, 51, 100}) {
    VecD x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.normal() * 3.0 + 0.7;

    for (int m : {10, 11, 17, n, 2 * n}) {
      VecD y = dsp::fft_resample(x, m);
      REQUIRE(y.size() == m);
      CHECK(y.mean() == doctest::Approx(x.mean()).epsilon(1e-12));
    }

    VecD same = dsp::fft_resample(x, n);
    CHECK((same - x).cwiseAbs().maxCoeff() == 0.0);  // bitwise identity
  }
}

TEST_CASE("fft_resample reproduces band-limited signals exactly") {
  // cos(2 pi 3 n / 20) for n < 20, upsampled to 40 points, must equal the
  // same cosine sampled twice as fast.
  const int n = 20, m = 40;
  VecD x(n);
  for (int i = 0; i < n; ++i) x[i] = std::cos(2.0 * M_PI * 3.0 * i / n);
  VecD y = dsp::fft_resample(x, m);
  for (int j = 0; j < m; ++j)
    CHECK(y[j] == doctest::Approx(std::cos(2.0 * M_PI * 3.0 * j / m))
                      .epsilon(1e-9));
}

TEST_CASE("fft_convolve equals the direct convolution sum") {
  Rng rng(53);
  VecD a(13), b(7);
  for (int i = 0; i < 13; ++i) a[i] = rng.normal();
  for (int i = 0; i < 7; ++i) b[i] = rng.normal();

  VecD got = dsp::fft_convolve(a, b);
  REQUIRE(got.size() == 19);
  for (int k = 0; k < 19; ++k) {
    double want = 0;
    for (int i = 0; i < 13; ++i) {
      const int j = k - i;
      if (j >= 0 && j < 7) want += a[i] * b[j];
    }
    CHECK(got[k] == doctest::Approx(want).epsilon(1e-9));
  }

  SUBCASE("float overload computes in double") {
    VecF af = a.cast<float>(), bf = b.cast<float>();
    VecF gf = dsp::fft_convolve(af, bf);
    REQUIRE(gf.size() == 19);
    for (int k = 0; k < 19; ++k)
      CHECK(gf[k] == doctest::Approx(got[k]).epsilon(1e-5));
  }
}
