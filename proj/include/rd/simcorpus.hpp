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
// Synthetic replay-attack corpus.  Utterances are speech-like harmonic
// sources pushed through parametric room simulations; replayed ("spoof")
// versions additionally pass through an acquisition + playback-device
// chain.  Labels form 27 environments x (bona fide + 9 attacks) = 270
// joint classes.  Every random quantity derives from explicit seeds, so
// a corpus regenerates bit-for-bit.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rd/common.hpp"
#include "rd/wav.hpp"

namespace rd::sim {

// ---------------------------------------------------------------------------
// Label universe

// Three ordinal room knobs, each a/b/c.  The physical mappings are design
// values chosen so the categories stay acoustically separable at desk scale.
struct EnvConfig {
  char room = 'a';    // early-reflection spacing: 2 / 5 / 10 ms
  char t60 = 'a';     // reverberation time: 0.1 / 0.4 / 0.8 s
  char talker = 'a';  // direct-to-reverb ratio: 12 / 6 / 0 dB

  double reflection_spacing() const;  // seconds
  double t60_seconds() const;
  double drr_db() const;
  std::string id() const;  // e.g. "abc"
};

EnvConfig parse_env(const std::string& id);
const std::vector<EnvConfig>& all_envs();  // all 27, lexicographic order

// Replay device + attacker placement.  The canonical nine combinations come
// from two ordinal letters; the numeric fields are kept explicit so tests
// can build transparent or custom devices.
struct AttackConfig {
  bool bona_fide = false;
  char dist = 'A';     // acquisition SNR: 30 / 20 / 10 dB
  char quality = 'A';  // passband (50,7800)/(100,4000)/(300,3000) Hz
                       // + tanh strength 0.01 / 0.1 / 0.3
  double snr_db = 30.0;
  double pass_lo_hz = 50.0;
  double pass_hi_hz = 7800.0;
  double nonlinearity = 0.01;

  std::string id() const;  // "00" for bona fide, else e.g. "BC"
};

AttackConfig bona_fide_attack();
AttackConfig parse_attack(const std::string& id);
const std::vector<AttackConfig>& all_attacks();  // "00" first, then 9 spoofs

// ---------------------------------------------------------------------------
// Signal chain

// Speech-like source: harmonic pulse train with a slowly drifting pitch in
// 80-300 Hz, shaped by formant-style resonators, plus a low noise floor.
// Peak amplitude is exactly 0.5.
Waveform synth_source(std::uint64_t seed, double duration);

// Convolution with a synthetic room impulse response: unit direct path,
// early reflections spaced per room size, and a noise tail decaying at the
// T60 rate; everything after the direct path is scaled to hit the
// configured direct-to-reverb ratio.
Waveform apply_environment(const Waveform& w, const EnvConfig& env,
                           std::uint64_t seed);
// The impulse response itself, for decay-analysis tests.
VecF room_impulse_response(const EnvConfig& env, std::uint64_t seed,
                           int sample_rate = 16000);

// Replay chain: capture in the room (apply_environment), add acquisition
// noise at the attacker SNR, pass through the device (brickwall bandpass
// followed by y = tanh(q x)/q), then re-present through the same room.
// Sub-seeds are derive_seed(seed, 0/1/2) for the two room passes and the
// noise draw, so a transparent device reproduces the double room pass
// bitwise.
Waveform apply_attack(const Waveform& w, const AttackConfig& attack,
                      const EnvConfig& env, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Corpus generation

struct ManifestEntry {
  std::string utt_id;
  std::string path;  // relative to the manifest's directory
  std::string split; // train | dev | eval
  std::string env_id;
  std::string attack_id;  // "00" = bona fide
  std::uint64_t seed = 0;

  bool is_bona_fide() const { return attack_id == "00"; }
  std::string joint_id() const { return env_id + attack_id; }
};

struct CorpusSpec {
  int n_train = 0;
  int n_dev = 0;
  int n_eval = 0;
  std::string out_dir;
  std::uint64_t seed = 0;
  double bona_fraction = 0.1;
};

// Builds the manifest and writes every WAV under out_dir/wav/.  Class
// assignment is balanced: bona fide gets round-robin environments, spoof
// gets round-robin (env, attack) pairs, then the order is shuffled - so
// every joint class is covered whenever a split has >= 243 spoof rows.
std::vector<ManifestEntry> generate_corpus(const CorpusSpec& spec);

// Renders the waveform for one manifest row (used by generate_corpus and
// by anyone regenerating a single utterance).
Waveform render_utterance(const ManifestEntry& e);

void save_manifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> load_manifest(const std::string& path);

// ---------------------------------------------------------------------------
// Simulated verification backend

// One ASV trial score.  cls is "target", "nontarget", or "spoof".
struct AsvTrial {
  std::string utt_id;
  std::string cls;
  double score = 0;
};

// Gaussian score model: targets N(2,1), nontargets N(-2,1), spoof trials
// N(mu,1) with mu = 1.5 / 0.5 / -1.0 for device quality A / B / C - the
// better the replay device, the more the verification system is fooled.
// Each bona fide row yields one target and one synthetic nontarget trial
// (id suffix "-nt"); each spoof row yields one spoof trial.
std::vector<AsvTrial> simulate_asv_scores(
    const std::vector<ManifestEntry>& manifest, std::uint64_t seed);

}  // namespace rd::sim
