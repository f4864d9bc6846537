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

#include "rd/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "rd/archive.hpp"
#include "rd/countermeasure.hpp"
#include "rd/features.hpp"
#include "rd/nnet_io.hpp"
#include "rd/simcorpus.hpp"
#include "rd/wav.hpp"

namespace rd::pipeline {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kSplits = {"train", "dev", "eval"};

void say(const StageOptions& opt, const std::string& msg) {
  if (opt.log) *opt.log << msg << '\n';
}

std::string hex16(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Artifacts are bound to the config that made them; a stale input usually
// means an upstream stage was not rerun after a config change.
void check_hash(std::uint64_t artifact_hash,
                const config::ExperimentConfig& cfg, const StageOptions& opt,
                const std::string& path) {
  if (opt.force) return;
  const std::uint64_t want = cfg.hash();
  if (artifact_hash != want) {
    throw DataError(path + ": made under config " + hex16(artifact_hash) +
                    " but the current config is " + hex16(want) +
                    "; rerun the producing stage or pass --force");
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& leaf) {
  return (fs::path(dir) / leaf).string();
}

std::vector<sim::ManifestEntry> load_manifest_checked(
    const config::ExperimentConfig& cfg) {
  const std::string path = manifest_path(cfg);
  if (!fs::exists(path)) {
    throw DataError(path + " not found; run the simulate stage first");
  }
  return sim::load_manifest(path);
}

std::vector<sim::ManifestEntry> split_entries(
    const std::vector<sim::ManifestEntry>& manifest, const std::string& split) {
  std::vector<sim::ManifestEntry> out;
  for (const auto& e : manifest) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

// ---- Simulated-verifier trial file ---------------------------------------

void save_asv_trials(const std::string& path,
                     const std::vector<sim::AsvTrial>& trials,
                     std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "# config " << hex16(config_hash) << '\n';
  char buf[64];
  for (const auto& t : trials) {
    std::snprintf(buf, sizeof(buf), " %.6f\n", t.score);
    os << t.utt_id << ' ' << t.cls << buf;
  }
  if (!os) throw DataError("write failed: " + path);
}

std::vector<sim::AsvTrial> load_asv_trials(const std::string& path,
                                           std::uint64_t* config_hash) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path + "; run simulate first");
  if (config_hash) *config_hash = 0;
  std::vector<sim::AsvTrial> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("# config ", 0) == 0 && config_hash) {
        *config_hash = std::stoull(line.substr(9), nullptr, 16);
      }
      continue;
    }
    std::istringstream ls(line);
    sim::AsvTrial t;
    if (!(ls >> t.utt_id >> t.cls >> t.score)) {
      throw DataError(path + ": malformed trial line '" + line + "'");
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---- Countermeasure input assembly ----------------------------------------

// Stacked (down-sampled, frame-major) front-end vectors in archive order.
std::vector<std::pair<std::string, VecF>> stacked_features(
    const config::ExperimentConfig& cfg, const std::string& split,
    const StageOptions& opt) {
  const std::string path = feature_archive_path(cfg, split);
  archive::FeatureArchiveHeader header;
  auto mats = archive::read_feature_archive(path, &header);
  check_hash(header.config_hash, cfg, opt, path);
  std::vector<std::pair<std::string, VecF>> out;
  out.reserve(mats.size());
  for (const auto& f : mats) {
    feat::FeatureMatrix d =
        feat::downsample_frames(f, cfg.features.downsample_frames);
    out.emplace_back(f.utterance_id, feat::stack_frames(d));
  }
  return out;
}

// utt_id -> c-scaled projected embedding.
std::map<std::string, VecF> scaled_embeddings(
    const config::ExperimentConfig& cfg, const std::string& split,
    const StageOptions& opt) {
  const std::string xp = xvec_archive_path(cfg, split);
  archive::XvecArchive xa = archive::read_xvec_archive(xp);
  check_hash(xa.config_hash, cfg, opt, xp);
  auto loaded = emb::load_lda(lda_path(cfg));
  check_hash(loaded.config_hash, cfg, opt, lda_path(cfg));
  const float c = static_cast<float>(cfg.xvec.scale_c);
  std::map<std::string, VecF> out;
  for (const auto& rec : xa.records) {
    out[rec.utt_id] = c * emb::lda_project(loaded.lda, rec.vec);
  }
  return out;
}

struct CmInputSet {
  std::vector<std::string> ids;
  std::vector<VecF> vectors;
};

// Builds the configured countermeasure input per utterance.  `rescaler` is
// applied to the stacked front-end part when the inputs include it; pass
// nullptr only for the xvec-only variant.
CmInputSet assemble_cm_inputs(const config::ExperimentConfig& cfg,
                              const std::string& split,
                              const feat::Rescaler* rescaler,
                              const StageOptions& opt) {
  const config::CmInputs inputs = config::parse_cm_inputs(cfg.cm.inputs);
  CmInputSet set;
  if (inputs == config::CmInputs::kXvecOnly) {
    const std::string xp = xvec_archive_path(cfg, split);
    archive::XvecArchive xa = archive::read_xvec_archive(xp);
    check_hash(xa.config_hash, cfg, opt, xp);
    auto loaded = emb::load_lda(lda_path(cfg));
    check_hash(loaded.config_hash, cfg, opt, lda_path(cfg));
    const float c = static_cast<float>(cfg.xvec.scale_c);
    for (const auto& rec : xa.records) {
      set.ids.push_back(rec.utt_id);
      set.vectors.push_back(c * emb::lda_project(loaded.lda, rec.vec));
    }
    return set;
  }

  auto stacked = stacked_features(cfg, split, opt);
  std::map<std::string, VecF> embeddings;
  if (inputs == config::CmInputs::kCombined) {
    embeddings = scaled_embeddings(cfg, split, opt);
  }
  for (auto& [id, vec] : stacked) {
    VecF v = rescaler ? rescaler->apply(vec) : vec;
    if (inputs == config::CmInputs::kCombined) {
      auto it = embeddings.find(id);
      if (it == embeddings.end()) {
        throw DataError("utterance " + id + " has features but no embedding; "
                        "rerun extract-xvec");
      }
      // The embedding is already c-scaled; concat with weight 1.
      v = feat::concat_embedding(v, it->second, 1.0f);
    }
    set.ids.push_back(id);
    set.vectors.push_back(std::move(v));
  }
  return set;
}

// +1 bona fide / -1 spoof, aligned with `ids`.
std::vector<float> cm_targets(const std::vector<sim::ManifestEntry>& manifest,
                              const std::vector<std::string>& ids) {
  std::map<std::string, bool> bona;
  for (const auto& e : manifest) bona[e.utt_id] = e.is_bona_fide();
  std::vector<float> t;
  t.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = bona.find(id);
    if (it == bona.end()) {
      throw DataError("utterance " + id + " is not in the manifest");
    }
    t.push_back(it->second ? cm::kBonaFideTarget : cm::kSpoofTarget);
  }
  return t;
}

nnet::TrainConfig<float> trainer_config(double lr, int batch, int epochs,
                                        int patience, std::uint64_t seed) {
  nnet::TrainConfig<float> tc;
  tc.learning_rate = static_cast<float>(lr);
  tc.batch_size = batch;
  tc.max_epochs = epochs;
  tc.patience = patience;
  tc.min_delta = 0;
  tc.val_fraction = 0.1;
  tc.seed = seed;
  return tc;
}

std::vector<std::tuple<int, double, double>> history_rows(
    const nnet::TrainResult& r) {
  std::vector<std::tuple<int, double, double>> rows;
  rows.reserve(r.history.size());
  for (const auto& e : r.history) {
    rows.emplace_back(e.epoch, e.train_loss, e.val_loss);
  }
  return rows;
}

}  // namespace

// ---- Artifact locations ----------------------------------------------------

std::string manifest_path(const config::ExperimentConfig& cfg) {
  return join(cfg.paths.corpus_dir, "manifest.txt");
}
std::string asv_scores_path(const config::ExperimentConfig& cfg) {
  return join(cfg.paths.corpus_dir, "asv_scores.txt");
}
std::string feature_archive_path(const config::ExperimentConfig& cfg,
                                 const std::string& split) {
  return join(cfg.paths.work_dir,
              "feat_" + cfg.features.kind + "_" + split + ".bin");
}
std::string embedding_feature_path(const config::ExperimentConfig& cfg,
                                   const std::string& split) {
  return join(cfg.paths.work_dir, "mfccwide_" + split + ".bin");
}
std::string extractor_path(const config::ExperimentConfig& cfg) {
  return join(cfg.paths.work_dir, "xvec_net.bin");
}
std::string xvec_history_path(const config::ExperimentConfig& cfg) {
  return join(cfg.paths.work_dir, "xvec_history.txt");
}
std::string xvec_archive_path(const config::ExperimentConfig& cfg,
                              const std::string& split) {
  return join(cfg.paths.work_dir, "xvec_" + split + ".bin");
}
std::string lda_path(const config::ExperimentConfig& cfg) {
  return join(cfg.paths.work_dir, "lda.bin");
}
std::string rescaler_path(const config::ExperimentConfig& cfg) {
  return join(cfg.paths.work_dir, "rescaler.txt");
}
std::string cm_model_path(const config::ExperimentConfig& cfg) {
  return join(cfg.paths.work_dir, "cm_net.bin");
}
std::string cm_history_path(const config::ExperimentConfig& cfg) {
  return join(cfg.paths.work_dir, "cm_history.txt");
}
std::string scores_path(const config::ExperimentConfig& cfg,
                        const std::string& split) {
  return join(cfg.paths.work_dir, "scores_" + split + ".txt");
}
std::string analysis_path(const config::ExperimentConfig& cfg) {
  return join(cfg.paths.work_dir, "analysis.txt");
}

// ---- Stages ----------------------------------------------------------------

void simulate(const config::ExperimentConfig& cfg, const StageOptions& opt) {
  config::validate(cfg);
  const std::uint64_t seed = cfg.require_seed();
  auto manifest = sim::generate_corpus(config::corpus_spec(cfg));
  auto trials =
      sim::simulate_asv_scores(manifest, derive_seed(seed, 0x617376));
  save_asv_trials(asv_scores_path(cfg), trials, cfg.hash());
  int n_bona = 0;
  for (const auto& e : manifest) n_bona += e.is_bona_fide() ? 1 : 0;
  say(opt, "[simulate] " + std::to_string(manifest.size()) +
               " utterances (" + std::to_string(n_bona) + " bona fide), " +
               std::to_string(trials.size()) + " verifier trials -> " +
               cfg.paths.corpus_dir);
}

void extract(const config::ExperimentConfig& cfg, const StageOptions& opt) {
  config::validate(cfg);
  auto manifest = load_manifest_checked(cfg);
  ensure_dir(cfg.paths.work_dir);
  const feat::FeatureConfig front = config::feature_config(cfg);
  const feat::FeatureConfig wide = config::embedding_feature_config(cfg);
  const std::uint64_t hash = cfg.hash();

  for (const auto& split : kSplits) {
    auto entries = split_entries(manifest, split);
    if (entries.empty()) continue;
    archive::FeatureArchiveWriter front_out(feature_archive_path(cfg, split),
                                            front.kind, front.n_coeffs,
                                            /*m_frames=*/0, hash);
    archive::FeatureArchiveWriter wide_out(embedding_feature_path(cfg, split),
                                           wide.kind, wide.n_coeffs,
                                           /*m_frames=*/0, hash);
    for (const auto& e : entries) {
      Waveform w = read_wav(join(cfg.paths.corpus_dir, e.path));
      feat::FeatureMatrix f = feat::extract(w, front);
      f.utterance_id = e.utt_id;
      front_out.append(f);
      feat::FeatureMatrix m = feat::extract(w, wide);
      m.utterance_id = e.utt_id;
      wide_out.append(m);
    }
    front_out.close();
    wide_out.close();
    say(opt, "[extract] " + split + ": " + std::to_string(entries.size()) +
                 " utterances -> " + cfg.features.kind + " (N=" +
                 std::to_string(front.n_coeffs) + ") + mfcc-wide (N=" +
                 std::to_string(wide.n_coeffs) + ")");
  }
}

XvecTrainSummary train_xvec(const config::ExperimentConfig& cfg,
                            const StageOptions& opt) {
  config::validate(cfg);
  const std::uint64_t seed = cfg.require_seed();
  auto manifest = load_manifest_checked(cfg);
  std::map<std::string, std::string> joint;
  for (const auto& e : manifest) joint[e.utt_id] = e.joint_id();

  const std::string path = embedding_feature_path(cfg, "train");
  archive::FeatureArchiveHeader header;
  auto mats = archive::read_feature_archive(path, &header);
  check_hash(header.config_hash, cfg, opt, path);

  std::vector<MatF> frames;
  std::vector<std::string> labels;
  frames.reserve(mats.size());
  for (const auto& f : mats) {
    frames.push_back(f.values.transpose()); // to frames x dim
    auto it = joint.find(f.utterance_id);
    if (it == joint.end()) {
      throw DataError("utterance " + f.utterance_id +
                      " is not in the manifest");
    }
    labels.push_back(it->second);
  }

  emb::XvecTrainOptions xopt;
  xopt.tdnn = config::tdnn_config(
      cfg, static_cast<int>(emb::joint_class_universe().size()));
  xopt.trainer =
      trainer_config(cfg.xvec.learning_rate, cfg.xvec.batch_size,
                     cfg.xvec.epochs, cfg.xvec.patience, /*seed=*/0);
  xopt.chunk_frames = cfg.xvec.chunk_frames;

  auto result = emb::train_xvector_extractor(frames, labels,
                                             emb::joint_class_universe(), xopt,
                                             derive_seed(seed, 0x78766563));
  emb::save_extractor(result.extractor, extractor_path(cfg), cfg.hash());
  archive::save_history(xvec_history_path(cfg), history_rows(result.stats));

  XvecTrainSummary s;
  s.epochs = static_cast<int>(result.stats.history.size());
  s.best_epoch = result.stats.best_epoch;
  s.val_loss = result.stats.best_val_loss;
  s.val_accuracy = result.stats.best_val_accuracy;
  char line[160];
  std::snprintf(line, sizeof(line),
                "[train-xvec] %d epochs (best %d), val loss %.4f, "
                "val accuracy %.2f%%",
                s.epochs, s.best_epoch, s.val_loss, 100.0 * s.val_accuracy);
  say(opt, line);
  return s;
}

void extract_xvec(const config::ExperimentConfig& cfg,
                  const StageOptions& opt) {
  config::validate(cfg);
  auto manifest = load_manifest_checked(cfg);
  auto loaded =
      emb::load_extractor(extractor_path(cfg), emb::joint_class_universe());
  check_hash(loaded.config_hash, cfg, opt, extractor_path(cfg));
  std::map<std::string, std::string> joint;
  for (const auto& e : manifest) joint[e.utt_id] = e.joint_id();

  for (const auto& split : kSplits) {
    const std::string fpath = embedding_feature_path(cfg, split);
    if (!fs::exists(fpath)) continue;
    archive::FeatureArchiveHeader header;
    auto mats = archive::read_feature_archive(fpath, &header);
    check_hash(header.config_hash, cfg, opt, fpath);

    archive::XvecArchive xa;
    xa.dim = loaded.extractor.embedding_dim();
    xa.config_hash = cfg.hash();
    xa.records.reserve(mats.size());
    for (const auto& f : mats) {
      archive::XvecRecord rec;
      rec.utt_id = f.utterance_id;
      auto it = joint.find(f.utterance_id);
      if (it == joint.end()) {
        throw DataError("utterance " + f.utterance_id +
                        " is not in the manifest");
      }
      rec.label = it->second;
      rec.vec = emb::extract_xvector(loaded.extractor, f.values.transpose());
      xa.records.push_back(std::move(rec));
    }
    write_xvec_archive(xvec_archive_path(cfg, split), xa);
    say(opt, "[extract-xvec] " + split + ": " +
                 std::to_string(xa.records.size()) + " embeddings (dim " +
                 std::to_string(xa.dim) + ")");
  }
}

void fit_lda_stage(const config::ExperimentConfig& cfg,
                   const StageOptions& opt) {
  config::validate(cfg);
  const std::string xp = xvec_archive_path(cfg, "train");
  archive::XvecArchive xa = archive::read_xvec_archive(xp);
  check_hash(xa.config_hash, cfg, opt, xp);
  std::vector<VecF> vecs;
  std::vector<std::string> labels;
  vecs.reserve(xa.records.size());
  for (const auto& rec : xa.records) {
    vecs.push_back(rec.vec);
    labels.push_back(rec.label);
  }
  emb::LdaModel lda =
      emb::fit_lda(vecs, labels, cfg.xvec.lda_dim, cfg.xvec.lda_reg);
  emb::save_lda(lda, lda_path(cfg), cfg.hash());
  say(opt, "[fit-lda] " + std::to_string(lda.classes.size()) + " classes, " +
               std::to_string(xa.dim) + " -> " +
               std::to_string(cfg.xvec.lda_dim) + " dims");
}

CmTrainSummary train_cm(const config::ExperimentConfig& cfg,
                        const StageOptions& opt) {
  config::validate(cfg);
  const std::uint64_t seed = cfg.require_seed();
  auto manifest = load_manifest_checked(cfg);
  const config::CmInputs inputs = config::parse_cm_inputs(cfg.cm.inputs);

  // Fit the max-abs rescaler on the training split's stacked features, then
  // assemble the configured inputs.
  feat::Rescaler rescaler;
  const bool uses_features = inputs != config::CmInputs::kXvecOnly;
  if (uses_features) {
    auto stacked = stacked_features(cfg, "train", opt);
    std::vector<VecF> raw;
    raw.reserve(stacked.size());
    for (auto& [id, v] : stacked) raw.push_back(v);
    rescaler = feat::fit_rescaler(raw);
    archive::save_rescaler(rescaler_path(cfg), rescaler, cfg.hash());
  }
  CmInputSet set = assemble_cm_inputs(cfg, "train",
                                      uses_features ? &rescaler : nullptr, opt);
  std::vector<float> targets = cm_targets(manifest, set.ids);

  cm::CmModelConfig mc;
  mc.noise_std = cfg.cm.noise_std;
  mc.noise_layer = cfg.cm.noise_layer;
  mc.conv_filters = cfg.cm.filters;
  mc.conv_kernel = cfg.cm.kernel;
  mc.l2 = cfg.cm.l2;
  mc.input_length = static_cast<int>(set.vectors.front().size());
  auto net = cm::build_cm(mc, derive_seed(seed, 0x636d6e));

  auto tc = trainer_config(cfg.cm.learning_rate, cfg.cm.batch_size,
                           cfg.cm.epochs, cfg.cm.patience,
                           derive_seed(seed, 0x636d74));
  auto result = cm::train_cm(*net, set.vectors, targets, tc);
  nnet::save_network(*net, cm_model_path(cfg), cfg.hash());
  archive::save_history(cm_history_path(cfg), history_rows(result));

  CmTrainSummary s;
  s.epochs = static_cast<int>(result.history.size());
  s.best_epoch = result.best_epoch;
  s.val_loss = result.best_val_loss;
  s.input_dim = mc.input_length;
  char line[160];
  std::snprintf(line, sizeof(line),
                "[train-cm] inputs %s (dim %d), %d epochs (best %d), "
                "val loss %.4f",
                cfg.cm.inputs.c_str(), s.input_dim, s.epochs, s.best_epoch,
                s.val_loss);
  say(opt, line);
  return s;
}

void score(const config::ExperimentConfig& cfg, const std::string& split,
           const StageOptions& opt) {
  config::validate(cfg);
  const config::CmInputs inputs = config::parse_cm_inputs(cfg.cm.inputs);
  feat::Rescaler rescaler;
  const bool uses_features = inputs != config::CmInputs::kXvecOnly;
  if (uses_features) {
    std::uint64_t rh = 0;
    rescaler = archive::load_rescaler(rescaler_path(cfg), &rh);
    check_hash(rh, cfg, opt, rescaler_path(cfg));
  }
  CmInputSet set = assemble_cm_inputs(cfg, split,
                                      uses_features ? &rescaler : nullptr, opt);
  auto loaded = nnet::load_network<float>(cm_model_path(cfg));
  check_hash(loaded.config_hash, cfg, opt, cm_model_path(cfg));

  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(set.ids.size());
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    scores.emplace_back(set.ids[i], cm::score(*loaded.net, set.vectors[i]));
  }
  archive::save_scores(scores_path(cfg, split), scores, cfg.hash());
  say(opt, "[score] " + split + ": " + std::to_string(scores.size()) +
               " scores -> " + scores_path(cfg, split));
}

EvalResult evaluate(const config::ExperimentConfig& cfg,
                    const std::string& split, const StageOptions& opt) {
  config::validate(cfg);
  auto manifest = load_manifest_checked(cfg);
  std::map<std::string, const sim::ManifestEntry*> by_id;
  for (const auto& e : manifest) by_id[e.utt_id] = &e;

  std::uint64_t sh = 0;
  auto scores = archive::load_scores(scores_path(cfg, split), &sh);
  check_hash(sh, cfg, opt, scores_path(cfg, split));
  if (scores.empty()) {
    throw DataError(scores_path(cfg, split) + ": no scores");
  }

  std::vector<double> bona, spoof;
  for (const auto& [id, s] : scores) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("scored utterance " + id + " is not in the manifest");
    }
    (it->second->is_bona_fide() ? bona : spoof).push_back(s);
  }
  if (bona.empty() || spoof.empty()) {
    throw DataError(split + " split needs both bona fide and spoof scores");
  }

  // Verifier operating point from the split's simulated trials.
  std::uint64_t ah = 0;
  auto trials = load_asv_trials(asv_scores_path(cfg), &ah);
  check_hash(ah, cfg, opt, asv_scores_path(cfg));
  metrics::AsvScores asv;
  for (const auto& t : trials) {
    std::string base = t.utt_id;
    if (base.size() > 3 && base.compare(base.size() - 3, 3, "-nt") == 0) {
      base.resize(base.size() - 3);
    }
    auto it = by_id.find(base);
    if (it == by_id.end()) {
      throw DataError("verifier trial " + t.utt_id +
                      " references an unknown utterance");
    }
    if (it->second->split != split) continue;
    if (t.cls == "target") asv.target.push_back(t.score);
    else if (t.cls == "nontarget") asv.nontarget.push_back(t.score);
    else if (t.cls == "spoof") asv.spoof.push_back(t.score);
    else throw DataError("unknown trial class '" + t.cls + "'");
  }

  metrics::TdcfParams params = config::tdcf_params(cfg);
  const auto op = metrics::asv_operating_point(asv);
  params.p_miss_asv = op.p_miss_asv;
  params.p_fa_asv = op.p_fa_asv;
  params.p_miss_spoof_asv = op.p_miss_spoof_asv;

  EvalResult r;
  r.eer = metrics::eer(bona, spoof).eer;
  r.min_tdcf = metrics::min_tdcf(bona, spoof, params).min_tdcf;
  r.n_bona = static_cast<int>(bona.size());
  r.n_spoof = static_cast<int>(spoof.size());
  char line[64];
  std::snprintf(line, sizeof(line), "EER %.2f%%", 100.0 * r.eer);
  r.eer_line = line;
  std::snprintf(line, sizeof(line), "min-tDCF %.3f", r.min_tdcf);
  r.tdcf_line = line;
  say(opt, r.eer_line);
  say(opt, r.tdcf_line);
  return r;
}

namespace {

// One labeled cosine-similarity grid, 6-char cells.
std::string format_grid(const std::string& title,
                        const std::vector<std::string>& ids, const MatF& m) {
  std::ostringstream os;
  os << title << '\n';
  os << "      ";
  for (const auto& id : ids) {
    os << ' ';
    os.width(6);
    os << id;
  }
  os << '\n';
  char buf[16];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << "  ";
    os.width(4);
    os << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), " %6.3f", static_cast<double>(m(i, j)));
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

AnalyzeResult analyze(const config::ExperimentConfig& cfg,
                      const StageOptions& opt) {
  config::validate(cfg);
  AnalyzeResult r;

  const std::string tp = xvec_archive_path(cfg, "train");
  const std::string dp = xvec_archive_path(cfg, "dev");
  archive::XvecArchive train = archive::read_xvec_archive(tp);
  check_hash(train.config_hash, cfg, opt, tp);
  archive::XvecArchive dev = archive::read_xvec_archive(dp);
  check_hash(dev.config_hash, cfg, opt, dp);

  // Joint labels are env (3 chars) + attack (2 chars).
  auto split_vectors = [](const archive::XvecArchive& a, bool env_part) {
    std::pair<std::vector<VecF>, std::vector<std::string>> out;
    for (const auto& rec : a.records) {
      if (rec.label.size() != 5) {
        throw DataError("malformed joint label '" + rec.label + "'");
      }
      out.first.push_back(rec.vec);
      out.second.push_back(env_part ? rec.label.substr(0, 3)
                                    : rec.label.substr(3));
    }
    return out;
  };

  for (const auto& a : sim::all_attacks()) r.attack_ids.push_back(a.id());
  for (const auto& e : sim::all_envs()) r.env_ids.push_back(e.id());

  auto [tv_a, tg_a] = split_vectors(train, /*env_part=*/false);
  auto [dv_a, dg_a] = split_vectors(dev, /*env_part=*/false);
  r.attack_confusion =
      emb::confusion_matrix(tv_a, tg_a, dv_a, dg_a, r.attack_ids);

  auto [tv_e, tg_e] = split_vectors(train, /*env_part=*/true);
  auto [dv_e, dg_e] = split_vectors(dev, /*env_part=*/true);
  r.env_confusion = emb::confusion_matrix(tv_e, tg_e, dv_e, dg_e, r.env_ids);

  r.strength = emb::attack_grouping_strength(r.attack_confusion);

  std::ostringstream report;
  report << format_grid(
      "Attack confusion (dev class mean vs train class mean, cosine):",
      r.attack_ids, r.attack_confusion);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "\nSpoof-pair similarity: same device quality %.4f vs same "
                "distance %.4f\n\n",
                r.strength.same_quality, r.strength.same_distance);
  report << buf;
  report << format_grid(
      "Environment confusion (dev class mean vs train class mean, cosine):",
      r.env_ids, r.env_confusion);
  r.report = report.str();

  std::ofstream os(analysis_path(cfg), std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + analysis_path(cfg));
  os << "# config " << hex16(cfg.hash()) << '\n' << r.report;
  if (!os) throw DataError("write failed: " + analysis_path(cfg));
  say(opt, r.report);
  return r;
}

}  // namespace rd::pipeline
