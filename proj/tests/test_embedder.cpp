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

#include <filesystem>
#include <set>

#include "doctest.h"
#include "rd/embedder.hpp"
#include "rd/simcorpus.hpp"

using namespace rd;
namespace fs = std::filesystem;

namespace {

// Gaussian blob utterances: class c shifts channel (c mod dim) by +2.
MatF blob_utterance(Rng& rng, int frames, int dim, int cls) {
  MatF m(frames, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<float>(0.5 * rng.normal());
  m.col(cls % dim).array() += 2.0f;
  return m;
}

emb::TdnnConfig tiny_tdnn() {
  emb::TdnnConfig t;
  t.frame_dim = 4;
  t.frame_units = 8;
  t.stats_units = 8;
  t.segment_units = 6;
  t.n_classes = 2;
  return t;
}

}  // namespace

TEST_CASE("joint class universe: 270 ids, environment-major") {
  const auto& u = emb::joint_class_universe();
  REQUIRE(u.size() == 270);
  CHECK(u.front() == "aaa00");
  CHECK(u.back().substr(0, 3) == "ccc");

  std::set<std::string> distinct(u.begin(), u.end());
  CHECK(distinct.size() == 270);

  // Each environment owns ten consecutive slots: bona fide then the nine
  // replay configurations.
  const auto& envs = sim::all_envs();
  const auto& attacks = sim::all_attacks();
  for (int e = 0; e < 27; ++e) {
    for (int a = 0; a < 10; ++a) {
      const auto& id = u[static_cast<std::size_t>(e * 10 + a)];
      CHECK(id.substr(0, 3) == envs[static_cast<std::size_t>(e)].id());
      CHECK(id.substr(3) == attacks[static_cast<std::size_t>(a)].id());
    }
  }
}

TEST_CASE("TDNN graph shape: embedding tap before the first segment ReLU") {
  auto ex = emb::build_tdnn(tiny_tdnn(), 11);
  // Five frame blocks of three layers, stats pooling, then the tapped dense.
  CHECK(ex.embedding_prefix == 17);
  CHECK(ex.net->n_layers() == 23);
  CHECK(ex.embedding_dim() == 6);
  CHECK(ex.classes.empty());  // the trainer fills these in

  Rng rng(5);
  MatF utt = blob_utterance(rng, 30, 4, 0);
  VecF v1 = emb::extract_xvector(ex, utt);
  VecF v2 = emb::extract_xvector(ex, utt);
  CHECK(v1.size() == 6);
  CHECK((v1 - v2).cwiseAbs().maxCoeff() == 0.0f);  // inference is pure

  // The TDNN contexts eat 14 frames and pooling needs two more.
  MatF tiny_utt = blob_utterance(rng, 10, 4, 0);
  CHECK_THROWS_AS(emb::extract_xvector(ex, tiny_utt), DataError);

  CHECK_THROWS_AS(emb::build_tdnn(emb::TdnnConfig{.n_classes = 1}, 1),
                  DataError);
}

TEST_CASE("full-scale preset keeps the published layer widths") {
  auto cfg = emb::full_scale_tdnn_config();
  CHECK(cfg.frame_units == 512);
  CHECK(cfg.stats_units == 1500);
  CHECK(cfg.segment_units == 512);
  CHECK(cfg.n_classes == 270);
}

TEST_CASE("training learns a separable two-class toy problem") {
  Rng rng(21);
  std::vector<MatF> feats;
  std::vector<std::string> labels;
  for (int i = 0; i < 60; ++i) {
    const int cls = i % 2;
    feats.push_back(blob_utterance(rng, 20, 4, cls));
    labels.push_back(cls ? "near" : "far");
  }

  emb::XvecTrainOptions opt;
  opt.tdnn = tiny_tdnn();
  opt.trainer.max_epochs = 30;
  opt.trainer.patience = 30;
  opt.trainer.batch_size = 16;
  opt.trainer.learning_rate = 0.01;
  opt.chunk_frames = 0;
  auto result =
      emb::train_xvector_extractor(feats, labels, {"far", "near"}, opt, 31);

  CHECK(result.stats.best_val_accuracy == 1.0);
  CHECK(result.extractor.classes.size() == 2);

  // Embeddings of the two classes separate in cosine.
  Rng rng2(22);
  VecF e_far = emb::extract_xvector(result.extractor,
                                    blob_utterance(rng2, 25, 4, 0));
  VecF e_far2 = emb::extract_xvector(result.extractor,
                                     blob_utterance(rng2, 25, 4, 0));
  VecF e_near = emb::extract_xvector(result.extractor,
                                     blob_utterance(rng2, 25, 4, 1));
  CHECK(emb::cosine_similarity(e_far, e_far2) >
        emb::cosine_similarity(e_far, e_near));

  SUBCASE("extractor checkpoints reproduce embeddings bitwise") {
    const std::string path =
        (fs::temp_directory_path() / "rd_test_xvec_net.bin").string();
    emb::save_extractor(result.extractor, path, 0x5555ULL);
    auto loaded = emb::load_extractor(path, {"far", "near"});
    CHECK(loaded.config_hash == 0x5555ULL);
    CHECK(loaded.extractor.embedding_prefix ==
          result.extractor.embedding_prefix);
    Rng rng3(23);
    MatF utt = blob_utterance(rng3, 25, 4, 1);
    VecF a = emb::extract_xvector(result.extractor, utt);
    VecF b = emb::extract_xvector(loaded.extractor, utt);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0f);
    fs::remove(path);
  }
}

TEST_CASE("absent classes are reported by name") {
  Rng rng(41);
  std::vector<MatF> feats = {blob_utterance(rng, 20, 4, 0),
                             blob_utterance(rng, 20, 4, 0)};
  std::vector<std::string> labels = {"aaa00", "aaa00"};
  emb::XvecTrainOptions opt;
  opt.tdnn = tiny_tdnn();
  CHECK_THROWS_WITH_AS(
      emb::train_xvector_extractor(feats, labels, {"aaa00", "aabAA", "aacBB"},
                                   opt, 1),
      doctest::Contains("aabAA"), DataError);

  CHECK_THROWS_WITH_AS(
      emb::train_xvector_extractor(feats, {"aaa00", "zzz99"},
                                   {"aaa00", "zzz99x"}, opt, 1),
      doctest::Contains("not in the class list"), DataError);
}

TEST_CASE("LDA separates classes and projects consistently") {
  Rng rng(61);
  const int dim = 8;
  std::vector<VecF> vectors;
  std::vector<std::string> labels;
  const std::vector<std::string> classes = {"c0", "c1", "c2", "c3"};
  for (int i = 0; i < 200; ++i) {
    const int cls = i % 4;
    VecF v(dim);
    for (int j = 0; j < dim; ++j) v[j] = static_cast<float>(0.4 * rng.normal());
    v[cls] += 3.0f;
    vectors.push_back(v);
    labels.push_back(classes[static_cast<std::size_t>(cls)]);
  }

  auto lda = emb::fit_lda(vectors, labels, 3);
  CHECK(lda.projection.rows() == dim);
  CHECK(lda.projection.cols() == 3);
  CHECK(lda.classes.size() == 4);
  CHECK(lda.class_means.rows() == 4);

  // Projected examples sit nearer their own class mean than any other.
  int correct = 0;
  for (int i = 0; i < 200; ++i) {
    VecF p = emb::lda_project(lda, vectors[static_cast<std::size_t>(i)]);
    CHECK(p.size() == 3);
    int best = -1;
    double best_sim = -2;
    for (int c = 0; c < 4; ++c) {
      VecF mean = lda.class_means.row(c);
      const double s = emb::cosine_similarity(p, mean);
      if (s > best_sim) {
        best_sim = s;
        best = c;
      }
    }
    if (classes[static_cast<std::size_t>(best)] ==
        labels[static_cast<std::size_t>(i)])
      ++correct;
  }
  CHECK(correct >= 190);

  SUBCASE("a rotated copy of the data is just as separable") {
    // Random orthogonal rotation via QR.
    MatF g(dim, dim);
    Rng rr(62);
    for (Eigen::Index i = 0; i < g.size(); ++i)
      g.data()[i] = static_cast<float>(rr.normal());
    Eigen::HouseholderQR<MatF> qr(g);
    MatF q = qr.householderQ() * MatF::Identity(dim, dim);

    std::vector<VecF> rotated;
    rotated.reserve(vectors.size());
    for (const auto& v : vectors) rotated.push_back(q * v);
    auto lda_rot = emb::fit_lda(rotated, labels, 3);

    auto eer_of = [&](const emb::LdaModel& m, const std::vector<VecF>& vs) {
      return emb::verification_eer(m, vs, labels, 99).eer;
    };
    CHECK(eer_of(lda, vectors) < 0.08);
    CHECK(eer_of(lda_rot, rotated) < 0.08);
  }

  SUBCASE("save/load round trip projects identically") {
    const std::string path =
        (fs::temp_directory_path() / "rd_test_lda.bin").string();
    emb::save_lda(lda, path, 0xAAULL);
    auto loaded = emb::load_lda(path);
    CHECK(loaded.config_hash == 0xAAULL);
    VecF p1 = emb::lda_project(lda, vectors[0]);
    VecF p2 = emb::lda_project(loaded.lda, vectors[0]);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0f);
    fs::remove(path);
  }
}

TEST_CASE("LDA demands more classes than output dimensions") {
  Rng rng(63);
  std::vector<VecF> vectors;
  std::vector<std::string> labels;
  for (int i = 0; i < 30; ++i) {
    VecF v(6);
    for (int j = 0; j < 6; ++j) v[j] = static_cast<float>(rng.normal());
    vectors.push_back(v);
    labels.push_back(i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c"));
  }
  CHECK_THROWS_AS(emb::fit_lda(vectors, labels, 3), DataError);   // k == d_out
  CHECK_THROWS_AS(emb::fit_lda(vectors, labels, 10), DataError);  // k < d_out
  CHECK_NOTHROW(emb::fit_lda(vectors, labels, 2));
}

TEST_CASE("LDA with one example per class falls back to between-class PCA") {
  // Singleton classes make the within-class scatter identically zero; the
  // fit must still produce a finite projection rather than fail the solve.
  Rng rng(65);
  std::vector<VecF> vectors;
  std::vector<std::string> labels;
  for (int i = 0; i < 12; ++i) {
    VecF v(5);
    for (int j = 0; j < 5; ++j) v[j] = static_cast<float>(rng.normal());
    vectors.push_back(v);
    labels.push_back("u" + std::to_string(i));
  }
  emb::LdaModel lda = emb::fit_lda(vectors, labels, 3);
  CHECK(lda.classes.size() == 12);
  CHECK(lda.projection.allFinite());
  CHECK(emb::lda_project(lda, vectors[0]).allFinite());

  // All vectors identical: no scatter anywhere, so the fit cannot proceed.
  std::vector<VecF> flat(4, VecF::Ones(5));
  std::vector<std::string> flat_labels{"a", "b", "c", "d"};
  CHECK_THROWS_AS(emb::fit_lda(flat, flat_labels, 2), NumericError);
}

TEST_CASE("verification trials score chance on unstructured data") {
  Rng rng(64);
  std::vector<VecF> train, test;
  std::vector<std::string> train_labels, test_labels;
  for (int i = 0; i < 120; ++i) {
    VecF v(6);
    for (int j = 0; j < 6; ++j) v[j] = static_cast<float>(rng.normal());
    if (i < 80) {
      train.push_back(v);
      train_labels.push_back("g" + std::to_string(i % 4));
    } else {
      test.push_back(v);
      test_labels.push_back("g" + std::to_string(i % 4));
    }
  }
  auto lda = emb::fit_lda(train, train_labels, 3);
  auto res = emb::verification_eer(lda, test, test_labels, 7);
  CHECK(res.n_trials == 80);  // one target + one nontarget per vector
  CHECK(res.eer > 0.2);       // can't be much better than coin flipping
  CHECK(res.eer <= 0.8);
}

TEST_CASE("confusion matrix compares dev means against train means") {
  std::vector<VecF> train = {VecF(2), VecF(2), VecF(2), VecF(2)};
  train[0] << 1.0f, 0.0f;
  train[1] << 0.9f, 0.1f;
  train[2] << 0.0f, 1.0f;
  train[3] << 0.1f, 0.9f;
  std::vector<std::string> train_groups = {"right", "right", "up", "up"};
  std::vector<VecF> dev = {VecF(2), VecF(2)};
  dev[0] << 1.0f, 0.05f;
  dev[1] << 0.05f, 1.0f;
  std::vector<std::string> dev_groups = {"right", "up"};

  MatF m = emb::confusion_matrix(train, train_groups, dev, dev_groups,
                                 {"right", "up"});
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  CHECK(m(0, 0) > m(0, 1));  // dev "right" resembles train "right" most
  CHECK(m(1, 1) > m(1, 0));
  CHECK(m(0, 0) > 0.99f);

  CHECK_THROWS_WITH_AS(
      emb::confusion_matrix(train, train_groups, dev, dev_groups,
                            {"right", "up", "left"}),
      doctest::Contains("left"), DataError);
}

TEST_CASE("attack grouping strength averages the two letter partitions") {
  const auto& attacks = sim::all_attacks();
  MatF m(10, 10);
  m.setZero();
  for (int i = 0; i < 10; ++i) {
    m(i, i) = 1.0f;
    for (int j = 0; j < 10; ++j) {
      if (i == j || i == 0 || j == 0) continue;
      const auto& a = attacks[static_cast<std::size_t>(i)];
      const auto& b = attacks[static_cast<std::size_t>(j)];
      if (a.quality == b.quality) m(i, j) = 0.9f;
      else if (a.dist == b.dist) m(i, j) = 0.2f;
    }
  }
  auto g = emb::attack_grouping_strength(m);
  CHECK(g.same_quality == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(g.same_distance == doctest::Approx(0.2).epsilon(1e-6));

  CHECK_THROWS_AS(emb::attack_grouping_strength(MatF::Zero(9, 9)), DataError);
}

TEST_CASE("cosine similarity basics") {
  VecF x(2), y(2), z(2);
  x << 1.0f, 0.0f;
  y << 0.0f, 1.0f;
  z << -1.0f, 0.0f;
  CHECK(emb::cosine_similarity(x, x) == doctest::Approx(1.0));
  CHECK(emb::cosine_similarity(x, y) == doctest::Approx(0.0));
  CHECK(emb::cosine_similarity(x, z) == doctest::Approx(-1.0));
  CHECK(emb::cosine_similarity(x, VecF::Zero(2)) == 0.0);
  CHECK_THROWS_AS(emb::cosine_similarity(x, VecF::Zero(3)), DataError);
}
