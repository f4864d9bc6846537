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

#include "rd/simcorpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "rd/dsp.hpp"

namespace rd::sim {

namespace {

constexpr int kSampleRate = 16000;

int ordinal_abc(char c, const char* what) {
  if (c < 'a' || c > 'c')
    throw DataError(std::string("bad ") + what + " letter '" + c +
                    "' (want a, b, or c)");
  return c - 'a';
}

int ordinal_ABC(char c, const char* what) {
  if (c < 'A' || c > 'C')
    throw DataError(std::string("bad ") + what + " letter '" + c +
                    "' (want A, B, or C)");
  return c - 'A';
}

// Two-pole resonator, applied in place.  r sets the bandwidth, theta the
// center frequency; the (1 - r^2) factor keeps peak gain near unity.
void resonate(VecF& x, double freq_hz, double bandwidth_hz) {
  const double r = std::exp(-3.141592653589793 * bandwidth_hz / kSampleRate);
  const double theta = 2.0 * 3.141592653589793 * freq_hz / kSampleRate;
  const double a1 = 2.0 * r * std::cos(theta);
  const double a2 = -r * r;
  const double g = 1.0 - r * r;
  double y1 = 0, y2 = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double y = g * x(i) + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    x(i) = static_cast<float>(y);
  }
}

void peak_normalize(VecF& x, float peak) {
  const float m = x.cwiseAbs().maxCoeff();
  if (m > 0) x *= peak / m;
}

// Brickwall frequency-domain bandpass.  Bins strictly outside [lo, hi] are
// zeroed (mirror bins included).  A passband covering the whole spectrum
// returns the input bitwise untouched.
VecF brickwall_bandpass(const VecF& x, double lo_hz, double hi_hz) {
  const Eigen::Index n = x.size();
  if (n == 0) return x;
  if (lo_hz <= 0.0 && hi_hz >= kSampleRate / 2.0) return x;
  std::vector<std::complex<double>> buf(n);
  for (Eigen::Index i = 0; i < n; ++i) buf[i] = x(i);
  std::vector<std::complex<double>> spec = dsp::fft(buf, false);
  for (Eigen::Index k = 0; k < n; ++k) {
    // Frequency of bin k (mirror half maps to its positive alias).
    const Eigen::Index kk = k <= n / 2 ? k : n - k;
    const double f = static_cast<double>(kk) * kSampleRate / n;
    if (f < lo_hz || f > hi_hz) spec[k] = 0.0;
  }
  std::vector<std::complex<double>> y = dsp::fft(spec, true);
  VecF out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out(i) = static_cast<float>(y[i].real());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Labels

double EnvConfig::reflection_spacing() const {
  static constexpr double v[] = {0.002, 0.005, 0.010};
  return v[ordinal_abc(room, "room size")];
}

double EnvConfig::t60_seconds() const {
  static constexpr double v[] = {0.1, 0.4, 0.8};
  return v[ordinal_abc(t60, "T60")];
}

double EnvConfig::drr_db() const {
  static constexpr double v[] = {12.0, 6.0, 0.0};
  return v[ordinal_abc(talker, "talker distance")];
}

std::string EnvConfig::id() const { return {room, t60, talker}; }

EnvConfig parse_env(const std::string& id) {
  if (id.size() != 3)
    throw DataError("environment id must be 3 letters, got '" + id + "'");
  EnvConfig e{id[0], id[1], id[2]};
  ordinal_abc(e.room, "room size");
  ordinal_abc(e.t60, "T60");
  ordinal_abc(e.talker, "talker distance");
  return e;
}

const std::vector<EnvConfig>& all_envs() {
  static const std::vector<EnvConfig> envs = [] {
    std::vector<EnvConfig> v;
    for (char r = 'a'; r <= 'c'; ++r)
      for (char t = 'a'; t <= 'c'; ++t)
        for (char d = 'a'; d <= 'c'; ++d) v.push_back({r, t, d});
    return v;
  }();
  return envs;
}

std::string AttackConfig::id() const {
  if (bona_fide) return "00";
  return {dist, quality};
}

AttackConfig bona_fide_attack() {
  AttackConfig a;
  a.bona_fide = true;
  return a;
}

namespace {

AttackConfig make_attack(char dist, char quality) {
  static constexpr double snr[] = {30.0, 20.0, 10.0};
  static constexpr double lo[] = {50.0, 100.0, 300.0};
  static constexpr double hi[] = {7800.0, 4000.0, 3000.0};
  static constexpr double nl[] = {0.01, 0.1, 0.3};
  AttackConfig a;
  a.bona_fide = false;
  a.dist = dist;
  a.quality = quality;
  a.snr_db = snr[ordinal_ABC(dist, "attacker distance")];
  const int q = ordinal_ABC(quality, "device quality");
  a.pass_lo_hz = lo[q];
  a.pass_hi_hz = hi[q];
  a.nonlinearity = nl[q];
  return a;
}

}  // namespace

AttackConfig parse_attack(const std::string& id) {
  if (id == "00") return bona_fide_attack();
  if (id.size() != 2)
    throw DataError("attack id must be '00' or 2 letters, got '" + id + "'");
  return make_attack(id[0], id[1]);
}

const std::vector<AttackConfig>& all_attacks() {
  static const std::vector<AttackConfig> attacks = [] {
    std::vector<AttackConfig> v;
    v.push_back(bona_fide_attack());
    for (char d = 'A'; d <= 'C'; ++d)
      for (char q = 'A'; q <= 'C'; ++q) v.push_back(make_attack(d, q));
    return v;
  }();
  return attacks;
}

// ---------------------------------------------------------------------------
// Source synthesis

Waveform synth_source(std::uint64_t seed, double duration) {
  if (duration < 0.5 || duration > 5.0)
    throw DataError("source duration must lie in [0.5, 5] seconds");
  Rng rng(seed);
  const int n = static_cast<int>(std::lround(duration * kSampleRate));

  const double f0 = rng.uniform(80.0, 300.0);
  const double drift_rate = rng.uniform(0.3, 1.5);  // Hz
  const double drift_depth = 0.01;                  // ~1% vibrato
  // Three formant-ish resonances with moderate bandwidths.
  const double formant[3] = {rng.uniform(300.0, 900.0),
                             rng.uniform(1000.0, 2400.0),
                             rng.uniform(2600.0, 3500.0)};
  const double bandwidth[3] = {rng.uniform(80.0, 160.0),
                               rng.uniform(100.0, 200.0),
                               rng.uniform(120.0, 240.0)};

  // Narrow smooth pulse once per pitch period: strong harmonics at k*f0
  // without the spectral splatter of a hard impulse train.
  VecF x(n);
  double phase = 0.0;
  const double two_pi = 2.0 * 3.141592653589793;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double inst_f0 =
        f0 * (1.0 + drift_depth * std::sin(two_pi * drift_rate * t));
    phase += inst_f0 / kSampleRate;
    if (phase >= 1.0) phase -= 1.0;
    const double bump = 0.5 - 0.5 * std::cos(two_pi * phase);
    x(i) = static_cast<float>(std::pow(bump, 8.0));
  }

  for (int r = 0; r < 3; ++r) resonate(x, formant[r], bandwidth[r]);

  // Low noise floor so the log-spectral features never see exact silence.
  for (int i = 0; i < n; ++i)
    x(i) += static_cast<float>(1e-3 * rng.normal());

  peak_normalize(x, 0.5f);
  return Waveform{std::move(x), kSampleRate};
}

// ---------------------------------------------------------------------------
// Room simulation

VecF room_impulse_response(const EnvConfig& env, std::uint64_t seed,
                           int sample_rate) {
  Rng rng(seed);
  const double t60 = env.t60_seconds();
  const double len_s = std::max(0.08, 1.3 * t60);
  const int len = static_cast<int>(std::lround(len_s * sample_rate));
  VecF h = VecF::Zero(len);
  h(0) = 1.0f;  // direct path

  // Four discrete early reflections at multiples of the room spacing,
  // geometrically attenuated, random polarity.
  const double spacing = env.reflection_spacing();
  for (int k = 1; k <= 4; ++k) {
    const int idx = static_cast<int>(std::lround(k * spacing * sample_rate));
    if (idx <= 0 || idx >= len) continue;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double decay = std::exp(-6.91 * (k * spacing) / t60);
    h(idx) += static_cast<float>(sign * std::pow(0.7, k) * decay);
  }

  // Diffuse tail: white noise under the -60 dB/T60 exponential envelope.
  for (int i = 1; i < len; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    h(i) += static_cast<float>(0.25 * rng.normal() * std::exp(-6.91 * t / t60));
  }

  // Scale everything after the direct path so that
  // 10*log10(direct / reverb) equals the configured DRR.
  double reverb = 0;
  for (int i = 1; i < len; ++i) reverb += static_cast<double>(h(i)) * h(i);
  if (reverb > 0) {
    const double target = std::pow(10.0, -env.drr_db() / 10.0);  // direct = 1
    const double scale = std::sqrt(target / reverb);
    for (int i = 1; i < len; ++i) h(i) = static_cast<float>(h(i) * scale);
  }
  return h;
}

Waveform apply_environment(const Waveform& w, const EnvConfig& env,
                           std::uint64_t seed) {
  const VecF h = room_impulse_response(env, seed, w.sample_rate);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = dsp::fft_convolve(w.samples, h);
  return out;
}

// ---------------------------------------------------------------------------
// Replay chain

Waveform apply_attack(const Waveform& w, const AttackConfig& attack,
                      const EnvConfig& env, std::uint64_t seed) {
  // Interception: the attacker records the talker in the room.
  Waveform stage = apply_environment(w, env, derive_seed(seed, 0));

  // Acquisition noise at the attacker's SNR.
  if (std::isfinite(attack.snr_db)) {
    const Eigen::Index n = stage.samples.size();
    double power = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      power += static_cast<double>(stage.samples(i)) * stage.samples(i);
    power /= std::max<Eigen::Index>(n, 1);
    const double sigma =
        std::sqrt(power / std::pow(10.0, attack.snr_db / 10.0));
    if (sigma > 0) {
      Rng rng(derive_seed(seed, 1));
      for (Eigen::Index i = 0; i < n; ++i)
        stage.samples(i) += static_cast<float>(sigma * rng.normal());
    }
  }

  // Playback device: band limitation then memoryless tanh compression.
  stage.samples =
      brickwall_bandpass(stage.samples, attack.pass_lo_hz, attack.pass_hi_hz);
  if (attack.nonlinearity > 0) {
    const double q = attack.nonlinearity;
    for (Eigen::Index i = 0; i < stage.samples.size(); ++i)
      stage.samples(i) =
          static_cast<float>(std::tanh(q * stage.samples(i)) / q);
  }

  // Re-presentation: the replayed signal passes through the room again.
  return apply_environment(stage, env, derive_seed(seed, 2));
}

// ---------------------------------------------------------------------------
// Corpus generation

Waveform render_utterance(const ManifestEntry& e) {
  const EnvConfig env = parse_env(e.env_id);
  const AttackConfig attack = parse_attack(e.attack_id);
  const double duration = Rng(derive_seed(e.seed, 3)).uniform(1.0, 3.0);
  Waveform src = synth_source(derive_seed(e.seed, 10), duration);
  Waveform y = attack.bona_fide
                   ? apply_environment(src, env, derive_seed(e.seed, 11))
                   : apply_attack(src, attack, env, derive_seed(e.seed, 12));
  peak_normalize(y.samples, 0.5f);
  return y;
}

namespace {

// Balanced label assignment for one split.  Bona fide rows cycle through
// the 27 environments; spoof rows cycle through all 243 (env, attack)
// pairs.  Both cycles start from shuffled orders and the final row order
// is shuffled again, so draws look uniform while every joint class is
// covered once a split has >= 243 spoof rows.
std::vector<ManifestEntry> assign_labels(int count, double bona_fraction,
                                         const std::string& split,
                                         char id_prefix, Rng& rng) {
  if (count < 1) throw DataError("split '" + split + "' needs >= 1 utterance");
  const int n_bona =
      std::max(1, static_cast<int>(std::lround(bona_fraction * count)));
  const int n_spoof = count - n_bona;
  if (n_spoof < 1)
    throw DataError("split '" + split + "' too small for any spoof rows");

  std::vector<int> env_order(27);
  std::iota(env_order.begin(), env_order.end(), 0);
  rng.shuffle(env_order);
  std::vector<int> pair_order(27 * 9);
  std::iota(pair_order.begin(), pair_order.end(), 0);
  rng.shuffle(pair_order);

  const auto& envs = all_envs();
  const auto& attacks = all_attacks();  // [0] is bona fide
  std::vector<ManifestEntry> rows;
  rows.reserve(count);
  for (int i = 0; i < n_bona; ++i) {
    ManifestEntry e;
    e.split = split;
    e.env_id = envs[env_order[i % 27]].id();
    e.attack_id = "00";
    rows.push_back(std::move(e));
  }
  for (int i = 0; i < n_spoof; ++i) {
    const int p = pair_order[i % (27 * 9)];
    ManifestEntry e;
    e.split = split;
    e.env_id = envs[p / 9].id();
    e.attack_id = attacks[1 + p % 9].id();
    rows.push_back(std::move(e));
  }
  rng.shuffle(rows);

  char buf[16];
  for (int i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof(buf), "%c%06d", id_prefix, i + 1);
    rows[i].utt_id = buf;
    rows[i].path = std::string("wav/") + buf + ".wav";
  }
  return rows;
}

}  // namespace

std::vector<ManifestEntry> generate_corpus(const CorpusSpec& spec) {
  if (spec.out_dir.empty()) throw DataError("corpus needs an output directory");
  if (spec.bona_fraction <= 0 || spec.bona_fraction >= 1)
    throw DataError("bona fide fraction must lie in (0, 1)");

  // Label algebra sanity: the universe this generator promises.
  if (all_envs().size() != 27 || all_attacks().size() != 10)
    throw DataError("label universe corrupted");

  Rng rng(derive_seed(spec.seed, 0x6c6162));  // label-assignment stream
  std::vector<ManifestEntry> manifest;
  struct SplitSpec { int count; const char* name; char prefix; };
  const SplitSpec splits[] = {{spec.n_train, "train", 'T'},
                              {spec.n_dev, "dev", 'D'},
                              {spec.n_eval, "eval", 'E'}};
  for (const auto& s : splits) {
    if (s.count == 0) continue;
    auto rows = assign_labels(s.count, spec.bona_fraction, s.name, s.prefix, rng);
    manifest.insert(manifest.end(), rows.begin(), rows.end());
  }
  if (manifest.empty()) throw DataError("corpus has no utterances");

  // Per-utterance streams keyed by position: synthesis order cannot matter.
  for (std::size_t i = 0; i < manifest.size(); ++i)
    manifest[i].seed = derive_seed(spec.seed, 1000 + i);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(spec.out_dir) / "wav", ec);
  if (ec)
    throw DataError("cannot create " + spec.out_dir + "/wav: " + ec.message());

  for (const ManifestEntry& e : manifest) {
    const std::string path = (fs::path(spec.out_dir) / e.path).string();
    try {
      write_wav(path, render_utterance(e));
    } catch (const DataError& err) {
      throw DataError(std::string(err.what()) + " (while writing " + path + ")");
    }
  }
  save_manifest((fs::path(spec.out_dir) / "manifest.txt").string(), manifest);
  return manifest;
}

void save_manifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  for (const ManifestEntry& e : entries)
    os << e.utt_id << ' ' << e.path << ' ' << e.split << ' ' << e.env_id << ' '
       << e.attack_id << ' ' << e.seed << '\n';
  if (!os) throw DataError("write failed: " + path);
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!(ls >> e.utt_id >> e.path >> e.split >> e.env_id >> e.attack_id >>
          e.seed))
      throw DataError(path + ": malformed manifest line '" + line + "'");
    parse_env(e.env_id);      // validate
    parse_attack(e.attack_id);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw DataError(path + ": empty manifest");
  return out;
}

// ---------------------------------------------------------------------------
// Simulated ASV scores

std::vector<AsvTrial> simulate_asv_scores(
    const std::vector<ManifestEntry>& manifest, std::uint64_t seed) {
  if (manifest.empty()) throw DataError("empty manifest");
  std::vector<AsvTrial> out;
  out.reserve(manifest.size() * 2);
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const ManifestEntry& e = manifest[i];
    Rng rng(derive_seed(seed, i));
    if (e.is_bona_fide()) {
      out.push_back({e.utt_id, "target", rng.normal(2.0, 1.0)});
      out.push_back({e.utt_id + "-nt", "nontarget", rng.normal(-2.0, 1.0)});
    } else {
      static constexpr double mu[] = {1.5, 0.5, -1.0};  // quality A / B / C
      const int q = ordinal_ABC(e.attack_id[1], "device quality");
      out.push_back({e.utt_id, "spoof", rng.normal(mu[q], 1.0)});
    }
  }
  return out;
}

}  // namespace rd::sim
