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

#include "rd/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rd::config {
namespace {

using EC = ExperimentConfig;

// Shortest decimal that round-trips; keeps dumps diffable and the
// fingerprint stable across dump/reload cycles.
std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

std::string fmt_int(long long v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& v, const char* key) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError(std::string(key) + ": expected an integer, got '" + v +
                     "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& v, const char* key) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError(std::string(key) +
                     ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& v, const char* key) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError(std::string(key) + ": expected a number, got '" + v +
                     "'");
  }
  return out;
}

bool parse_bool(const std::string& v, const char* key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw UsageError(std::string(key) + ": expected true or false, got '" + v +
                   "'");
}

}  // namespace

const char* cm_inputs_name(CmInputs v) {
  switch (v) {
    case CmInputs::kCombined: return "combined";
    case CmInputs::kFeaturesOnly: return "features";
    case CmInputs::kXvecOnly: return "xvec";
  }
  return "?";
}

CmInputs parse_cm_inputs(const std::string& name) {
  if (name == "combined") return CmInputs::kCombined;
  if (name == "features") return CmInputs::kFeaturesOnly;
  if (name == "xvec") return CmInputs::kXvecOnly;
  throw UsageError("cm.inputs must be combined, features, or xvec; got '" +
                   name + "'");
}

const std::vector<KeyDef>& schema() {
  static const std::vector<KeyDef> defs = {
      {"seed", "master seed; required before any random stage", true,
       [](const EC& c) {
         return c.seed ? std::to_string(*c.seed) : std::string("unset");
       },
       [](EC& c, const std::string& v) { c.seed = parse_u64(v, "seed"); }},
      {"threads", "worker cap; results never depend on it", false,
       [](const EC& c) { return fmt_int(c.threads); },
       [](EC& c, const std::string& v) { c.threads = parse_int(v, "threads"); }},

      {"paths.corpus_dir", "directory for simulated audio + manifest", false,
       [](const EC& c) { return c.paths.corpus_dir; },
       [](EC& c, const std::string& v) { c.paths.corpus_dir = v; }},
      {"paths.work_dir", "directory for derived artifacts", false,
       [](const EC& c) { return c.paths.work_dir; },
       [](EC& c, const std::string& v) { c.paths.work_dir = v; }},

      {"corpus.n_train", "training-split utterance count", true,
       [](const EC& c) { return fmt_int(c.corpus.n_train); },
       [](EC& c, const std::string& v) {
         c.corpus.n_train = parse_int(v, "corpus.n_train");
       }},
      {"corpus.n_dev", "development-split utterance count", true,
       [](const EC& c) { return fmt_int(c.corpus.n_dev); },
       [](EC& c, const std::string& v) {
         c.corpus.n_dev = parse_int(v, "corpus.n_dev");
       }},
      {"corpus.n_eval", "evaluation-split utterance count", true,
       [](const EC& c) { return fmt_int(c.corpus.n_eval); },
       [](EC& c, const std::string& v) {
         c.corpus.n_eval = parse_int(v, "corpus.n_eval");
       }},
      {"corpus.bona_fraction", "fraction of genuine utterances per split",
       true, [](const EC& c) { return fmt_double(c.corpus.bona_fraction); },
       [](EC& c, const std::string& v) {
         c.corpus.bona_fraction = parse_double(v, "corpus.bona_fraction");
       }},

      {"features.kind", "classifier front-end: mfcc|imfcc|rfcc|lfcc|scmc|cqcc",
       true, [](const EC& c) { return c.features.kind; },
       [](EC& c, const std::string& v) {
         feat::parse_kind(v); // validates
         c.features.kind = v;
       }},
      {"features.n_coeffs", "cepstral coefficient count; 0 = kind default",
       true, [](const EC& c) { return fmt_int(c.features.n_coeffs); },
       [](EC& c, const std::string& v) {
         c.features.n_coeffs = parse_int(v, "features.n_coeffs");
       }},
      {"features.n_bands", "filterbank size; 0 = follow n_coeffs", true,
       [](const EC& c) { return fmt_int(c.features.n_bands); },
       [](EC& c, const std::string& v) {
         c.features.n_bands = parse_int(v, "features.n_bands");
       }},
      {"features.f_min", "lower band edge in Hz; negative = kind default",
       true, [](const EC& c) { return fmt_double(c.features.f_min); },
       [](EC& c, const std::string& v) {
         c.features.f_min = parse_double(v, "features.f_min");
       }},
      {"features.f_max", "upper band edge in Hz; negative = kind default",
       true, [](const EC& c) { return fmt_double(c.features.f_max); },
       [](EC& c, const std::string& v) {
         c.features.f_max = parse_double(v, "features.f_max");
       }},
      {"features.downsample_frames", "frames kept per utterance after "
       "Fourier down-sampling", true,
       [](const EC& c) { return fmt_int(c.features.downsample_frames); },
       [](EC& c, const std::string& v) {
         c.features.downsample_frames =
             parse_int(v, "features.downsample_frames");
       }},

      {"xvec.full_scale", "use 512/1500/512 layer widths", true,
       [](const EC& c) { return fmt_bool(c.xvec.full_scale); },
       [](EC& c, const std::string& v) {
         c.xvec.full_scale = parse_bool(v, "xvec.full_scale");
       }},
      {"xvec.frame_units", "frame-level layer width (desk scale)", true,
       [](const EC& c) { return fmt_int(c.xvec.frame_units); },
       [](EC& c, const std::string& v) {
         c.xvec.frame_units = parse_int(v, "xvec.frame_units");
       }},
      {"xvec.stats_units", "width of the layer feeding statistics pooling",
       true, [](const EC& c) { return fmt_int(c.xvec.stats_units); },
       [](EC& c, const std::string& v) {
         c.xvec.stats_units = parse_int(v, "xvec.stats_units");
       }},
      {"xvec.segment_units", "embedding dimension", true,
       [](const EC& c) { return fmt_int(c.xvec.segment_units); },
       [](EC& c, const std::string& v) {
         c.xvec.segment_units = parse_int(v, "xvec.segment_units");
       }},
      {"xvec.chunk_frames", "training crop length in frames", true,
       [](const EC& c) { return fmt_int(c.xvec.chunk_frames); },
       [](EC& c, const std::string& v) {
         c.xvec.chunk_frames = parse_int(v, "xvec.chunk_frames");
       }},
      {"xvec.epochs", "embedding-network epoch cap", true,
       [](const EC& c) { return fmt_int(c.xvec.epochs); },
       [](EC& c, const std::string& v) {
         c.xvec.epochs = parse_int(v, "xvec.epochs");
       }},
      {"xvec.batch_size", "embedding-network minibatch size", true,
       [](const EC& c) { return fmt_int(c.xvec.batch_size); },
       [](EC& c, const std::string& v) {
         c.xvec.batch_size = parse_int(v, "xvec.batch_size");
       }},
      {"xvec.learning_rate", "Adam step size for the embedding network", true,
       [](const EC& c) { return fmt_double(c.xvec.learning_rate); },
       [](EC& c, const std::string& v) {
         c.xvec.learning_rate = parse_double(v, "xvec.learning_rate");
       }},
      {"xvec.patience", "embedding-network early-stopping patience", true,
       [](const EC& c) { return fmt_int(c.xvec.patience); },
       [](EC& c, const std::string& v) {
         c.xvec.patience = parse_int(v, "xvec.patience");
       }},
      {"xvec.l2", "embedding-network weight decay", true,
       [](const EC& c) { return fmt_double(c.xvec.l2); },
       [](EC& c, const std::string& v) {
         c.xvec.l2 = parse_double(v, "xvec.l2");
       }},
      {"xvec.lda_dim", "discriminant projection output dimension", true,
       [](const EC& c) { return fmt_int(c.xvec.lda_dim); },
       [](EC& c, const std::string& v) {
         c.xvec.lda_dim = parse_int(v, "xvec.lda_dim");
       }},
      {"xvec.lda_reg", "within-class scatter ridge, relative to its trace",
       true, [](const EC& c) { return fmt_double(c.xvec.lda_reg); },
       [](EC& c, const std::string& v) {
         c.xvec.lda_reg = parse_double(v, "xvec.lda_reg");
       }},
      {"xvec.scale_c", "weight on the appended projected embedding", true,
       [](const EC& c) { return fmt_double(c.xvec.scale_c); },
       [](EC& c, const std::string& v) {
         c.xvec.scale_c = parse_double(v, "xvec.scale_c");
       }},

      {"cm.inputs", "countermeasure inputs: combined|features|xvec", true,
       [](const EC& c) { return c.cm.inputs; },
       [](EC& c, const std::string& v) {
         parse_cm_inputs(v); // validates
         c.cm.inputs = v;
       }},
      {"cm.noise_layer", "include the training-noise layer", true,
       [](const EC& c) { return fmt_bool(c.cm.noise_layer); },
       [](EC& c, const std::string& v) {
         c.cm.noise_layer = parse_bool(v, "cm.noise_layer");
       }},
      {"cm.noise_std", "training-noise standard deviation", true,
       [](const EC& c) { return fmt_double(c.cm.noise_std); },
       [](EC& c, const std::string& v) {
         c.cm.noise_std = parse_double(v, "cm.noise_std");
       }},
      {"cm.filters", "convolution filter count", true,
       [](const EC& c) { return fmt_int(c.cm.filters); },
       [](EC& c, const std::string& v) {
         c.cm.filters = parse_int(v, "cm.filters");
       }},
      {"cm.kernel", "convolution kernel width", true,
       [](const EC& c) { return fmt_int(c.cm.kernel); },
       [](EC& c, const std::string& v) {
         c.cm.kernel = parse_int(v, "cm.kernel");
       }},
      {"cm.l2", "convolution weight decay", true,
       [](const EC& c) { return fmt_double(c.cm.l2); },
       [](EC& c, const std::string& v) {
         c.cm.l2 = parse_double(v, "cm.l2");
       }},
      {"cm.epochs", "countermeasure epoch cap", true,
       [](const EC& c) { return fmt_int(c.cm.epochs); },
       [](EC& c, const std::string& v) {
         c.cm.epochs = parse_int(v, "cm.epochs");
       }},
      {"cm.batch_size", "countermeasure minibatch size", true,
       [](const EC& c) { return fmt_int(c.cm.batch_size); },
       [](EC& c, const std::string& v) {
         c.cm.batch_size = parse_int(v, "cm.batch_size");
       }},
      {"cm.learning_rate", "Adam step size for the countermeasure", true,
       [](const EC& c) { return fmt_double(c.cm.learning_rate); },
       [](EC& c, const std::string& v) {
         c.cm.learning_rate = parse_double(v, "cm.learning_rate");
       }},
      {"cm.patience", "countermeasure early-stopping patience", true,
       [](const EC& c) { return fmt_int(c.cm.patience); },
       [](EC& c, const std::string& v) {
         c.cm.patience = parse_int(v, "cm.patience");
       }},

      {"metrics.p_target", "prior of target trials", true,
       [](const EC& c) { return fmt_double(c.metrics.p_target); },
       [](EC& c, const std::string& v) {
         c.metrics.p_target = parse_double(v, "metrics.p_target");
       }},
      {"metrics.p_nontarget", "prior of zero-effort impostor trials", true,
       [](const EC& c) { return fmt_double(c.metrics.p_nontarget); },
       [](EC& c, const std::string& v) {
         c.metrics.p_nontarget = parse_double(v, "metrics.p_nontarget");
       }},
      {"metrics.p_spoof", "prior of spoofing-attack trials", true,
       [](const EC& c) { return fmt_double(c.metrics.p_spoof); },
       [](EC& c, const std::string& v) {
         c.metrics.p_spoof = parse_double(v, "metrics.p_spoof");
       }},
      {"metrics.c_miss_asv", "cost of the verifier rejecting a target", true,
       [](const EC& c) { return fmt_double(c.metrics.c_miss_asv); },
       [](EC& c, const std::string& v) {
         c.metrics.c_miss_asv = parse_double(v, "metrics.c_miss_asv");
       }},
      {"metrics.c_fa_asv", "cost of the verifier accepting an impostor", true,
       [](const EC& c) { return fmt_double(c.metrics.c_fa_asv); },
       [](EC& c, const std::string& v) {
         c.metrics.c_fa_asv = parse_double(v, "metrics.c_fa_asv");
       }},
      {"metrics.c_miss_cm", "cost of rejecting a genuine utterance", true,
       [](const EC& c) { return fmt_double(c.metrics.c_miss_cm); },
       [](EC& c, const std::string& v) {
         c.metrics.c_miss_cm = parse_double(v, "metrics.c_miss_cm");
       }},
      {"metrics.c_fa_cm", "cost of accepting a replayed utterance", true,
       [](const EC& c) { return fmt_double(c.metrics.c_fa_cm); },
       [](EC& c, const std::string& v) {
         c.metrics.c_fa_cm = parse_double(v, "metrics.c_fa_cm");
       }},
  };
  return defs;
}

std::uint64_t ExperimentConfig::hash() const {
  std::string blob;
  for (const KeyDef& k : schema()) {
    if (!k.hashed) continue;
    blob += k.name;
    blob += '=';
    blob += k.get(*this);
    blob += '\n';
  }
  return fnv1a64(blob);
}

std::uint64_t ExperimentConfig::require_seed() const {
  if (!seed) {
    throw UsageError("no seed set; pass --seed or add 'seed = N' to the "
                     "config file");
  }
  return *seed;
}

namespace {

const KeyDef& find_key(const std::string& name) {
  for (const KeyDef& k : schema()) {
    if (name == k.name) return k;
  }
  throw UsageError("unknown config key '" + name +
                   "'; see --help for the full list");
}

}  // namespace

void parse_config_text(const std::string& text, ExperimentConfig* cfg) {
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw UsageError("config line " + std::to_string(line_no) +
                         ": unterminated [section] header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) +
                       ": expected 'key = value', got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw UsageError("config line " + std::to_string(line_no) +
                       ": empty key");
    }
    std::string full = section.empty() ? key : section + "." + key;
    find_key(full).set(*cfg, value);
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg;
  parse_config_text(buf.str(), &cfg);
  return cfg;
}

void apply_override(ExperimentConfig* cfg, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("override must look like section.key=value, got '" +
                     assignment + "'");
  }
  std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  find_key(key).set(*cfg, value);
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const KeyDef& k : schema()) {
    std::string name(k.name);
    std::size_t dot = name.find('.');
    std::string sec = dot == std::string::npos ? "" : name.substr(0, dot);
    std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
    if (sec != section) {
      if (!out.empty()) out += '\n';
      out += '[' + sec + "]\n";
      section = sec;
    }
    std::string value = k.get(cfg);
    if (name == "seed" && value == "unset") {
      out += "# seed = <unset>\n";
      continue;
    }
    out += leaf + " = " + value + '\n';
  }
  return out;
}

std::string describe_keys() {
  std::string out = "Config keys (override with --set key=value):\n";
  for (const KeyDef& k : schema()) {
    char line[256];
    std::snprintf(line, sizeof(line), "  %-28s %s\n", k.name, k.help);
    out += line;
  }
  return out;
}

void validate(const ExperimentConfig& cfg) {
  auto positive = [](long long v, const char* key) {
    if (v <= 0) {
      throw UsageError(std::string(key) + " must be positive, got " +
                       std::to_string(v));
    }
  };
  positive(cfg.threads, "threads");
  positive(cfg.corpus.n_train, "corpus.n_train");
  positive(cfg.corpus.n_dev, "corpus.n_dev");
  positive(cfg.corpus.n_eval, "corpus.n_eval");
  if (cfg.corpus.bona_fraction <= 0 || cfg.corpus.bona_fraction >= 1) {
    throw UsageError("corpus.bona_fraction must lie in (0, 1)");
  }
  feat::parse_kind(cfg.features.kind);
  if (cfg.features.n_coeffs < 0 || cfg.features.n_bands < 0) {
    throw UsageError("features.n_coeffs and features.n_bands must be >= 0");
  }
  positive(cfg.features.downsample_frames, "features.downsample_frames");
  positive(cfg.xvec.frame_units, "xvec.frame_units");
  positive(cfg.xvec.stats_units, "xvec.stats_units");
  positive(cfg.xvec.segment_units, "xvec.segment_units");
  positive(cfg.xvec.chunk_frames, "xvec.chunk_frames");
  positive(cfg.xvec.epochs, "xvec.epochs");
  positive(cfg.xvec.batch_size, "xvec.batch_size");
  positive(cfg.xvec.lda_dim, "xvec.lda_dim");
  if (cfg.xvec.learning_rate <= 0 || cfg.cm.learning_rate <= 0) {
    throw UsageError("learning rates must be positive");
  }
  if (cfg.xvec.patience < 0 || cfg.cm.patience < 0) {
    throw UsageError("patience must be >= 0");
  }
  if (cfg.xvec.l2 < 0 || cfg.cm.l2 < 0 || cfg.xvec.lda_reg < 0) {
    throw UsageError("weight-decay and ridge terms must be >= 0");
  }
  parse_cm_inputs(cfg.cm.inputs);
  if (cfg.cm.noise_std < 0) throw UsageError("cm.noise_std must be >= 0");
  positive(cfg.cm.filters, "cm.filters");
  positive(cfg.cm.kernel, "cm.kernel");
  positive(cfg.cm.epochs, "cm.epochs");
  positive(cfg.cm.batch_size, "cm.batch_size");
  const auto& m = cfg.metrics;
  if (m.p_target <= 0 || m.p_nontarget <= 0 || m.p_spoof <= 0 ||
      m.p_target + m.p_nontarget + m.p_spoof > 1.0 + 1e-9) {
    throw UsageError("metric priors must be positive and sum to at most 1");
  }
  if (m.c_miss_asv < 0 || m.c_fa_asv < 0 || m.c_miss_cm < 0 || m.c_fa_cm < 0) {
    throw UsageError("metric costs must be >= 0");
  }
}

feat::FeatureConfig feature_config(const ExperimentConfig& cfg) {
  feat::FeatureConfig fc =
      feat::default_config(feat::parse_kind(cfg.features.kind));
  if (cfg.features.n_coeffs > 0) {
    fc.n_coeffs = cfg.features.n_coeffs;
    fc.n_bands = cfg.features.n_coeffs; // square cepstral transform
  }
  if (cfg.features.n_bands > 0) fc.n_bands = cfg.features.n_bands;
  if (cfg.features.f_min >= 0) fc.f_min = cfg.features.f_min;
  if (cfg.features.f_max >= 0) fc.f_max = cfg.features.f_max;
  return fc;
}

feat::FeatureConfig embedding_feature_config(const ExperimentConfig&) {
  return feat::default_config(feat::FeatureKind::kMfccWide);
}

sim::CorpusSpec corpus_spec(const ExperimentConfig& cfg) {
  sim::CorpusSpec spec;
  spec.n_train = cfg.corpus.n_train;
  spec.n_dev = cfg.corpus.n_dev;
  spec.n_eval = cfg.corpus.n_eval;
  spec.bona_fraction = cfg.corpus.bona_fraction;
  spec.out_dir = cfg.paths.corpus_dir;
  spec.seed = cfg.require_seed();
  return spec;
}

emb::TdnnConfig tdnn_config(const ExperimentConfig& cfg, int n_classes) {
  emb::TdnnConfig tc = cfg.xvec.full_scale
                                ? emb::full_scale_tdnn_config()
                                : emb::TdnnConfig{};
  if (!cfg.xvec.full_scale) {
    tc.frame_units = cfg.xvec.frame_units;
    tc.stats_units = cfg.xvec.stats_units;
    tc.segment_units = cfg.xvec.segment_units;
  }
  tc.n_classes = n_classes;
  tc.l2 = cfg.xvec.l2;
  return tc;
}

metrics::TdcfParams tdcf_params(const ExperimentConfig& cfg) {
  metrics::TdcfParams p;
  p.p_tar = cfg.metrics.p_target;
  p.p_non = cfg.metrics.p_nontarget;
  p.p_spoof = cfg.metrics.p_spoof;
  p.c_miss_asv = cfg.metrics.c_miss_asv;
  p.c_fa_asv = cfg.metrics.c_fa_asv;
  p.c_miss_cm = cfg.metrics.c_miss_cm;
  p.c_fa_cm = cfg.metrics.c_fa_cm;
  return p;
}

}  // namespace rd::config
