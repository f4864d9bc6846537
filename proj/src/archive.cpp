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

#include "rd/archive.hpp"

#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "rd/binio.hpp"

namespace rd::archive {

namespace {

constexpr char kFeatMagic[] = "RDFEAT01";
constexpr char kXvecMagic[] = "RDXVEC01";

}  // namespace

// --------------------------------------------------------------------------
// RDFEAT01

FeatureArchiveWriter::FeatureArchiveWriter(const std::string& path,
                                           feat::FeatureKind kind,
                                           int n_coeffs, int m_frames,
                                           std::uint64_t config_hash)
    : os_(binio::open_out(path)),
      path_(path),
      kind_(kind),
      n_coeffs_(n_coeffs),
      m_frames_(m_frames) {
  if (n_coeffs < 1) throw DataError("archive needs a positive coefficient count");
  if (m_frames < 0) throw DataError("archive frame count cannot be negative");
  binio::write_magic(os_, kFeatMagic);
  binio::write_pod<std::uint32_t>(os_, static_cast<std::uint32_t>(kind));
  binio::write_pod<std::uint32_t>(os_, static_cast<std::uint32_t>(n_coeffs));
  binio::write_pod<std::uint32_t>(os_, static_cast<std::uint32_t>(m_frames));
  count_pos_ = os_.tellp();
  binio::write_pod<std::uint64_t>(os_, 0);  // record count, patched on close
  binio::write_pod<std::uint64_t>(os_, config_hash);
}

FeatureArchiveWriter::~FeatureArchiveWriter() {
  // A writer abandoned before close() leaves a count of zero; readers then
  // see an empty archive rather than a silently short one.
}

void FeatureArchiveWriter::append(const feat::FeatureMatrix& f) {
  if (closed_) throw DataError("append to closed archive: " + path_);
  if (f.kind != kind_)
    throw DataError("archive " + path_ + ": feature kind mismatch");
  if (f.n_coeffs() != n_coeffs_)
    throw DataError("archive " + path_ + ": expected " +
                    std::to_string(n_coeffs_) + " coefficients, got " +
                    std::to_string(f.n_coeffs()));
  if (m_frames_ != 0 && f.n_frames() != m_frames_)
    throw DataError("archive " + path_ + ": expected " +
                    std::to_string(m_frames_) + " frames, got " +
                    std::to_string(f.n_frames()));
  binio::write_string(os_, f.utterance_id);
  if (m_frames_ == 0)
    binio::write_pod<std::uint32_t>(os_,
                                    static_cast<std::uint32_t>(f.n_frames()));
  for (Eigen::Index i = 0; i < f.values.rows(); ++i)
    for (Eigen::Index j = 0; j < f.values.cols(); ++j)
      binio::write_pod<float>(os_, f.values(i, j));
  ++count_;
}

void FeatureArchiveWriter::close() {
  if (closed_) return;
  os_.seekp(count_pos_);
  binio::write_pod<std::uint64_t>(os_, count_);
  os_.flush();
  if (!os_) throw DataError("write failed: " + path_);
  os_.close();
  closed_ = true;
}

namespace {

FeatureArchiveHeader read_feat_header(std::istream& is,
                                      const std::string& path) {
  binio::expect_magic(is, kFeatMagic, path);
  FeatureArchiveHeader h;
  const auto kind = binio::read_pod<std::uint32_t>(is, "feature kind");
  if (kind > static_cast<std::uint32_t>(feat::FeatureKind::kMfccWide))
    throw DataError(path + ": unknown feature kind in header");
  h.kind = static_cast<feat::FeatureKind>(kind);
  h.n_coeffs = static_cast<int>(binio::read_pod<std::uint32_t>(is, "n_coeffs"));
  h.m_frames = static_cast<int>(binio::read_pod<std::uint32_t>(is, "m_frames"));
  h.count = binio::read_pod<std::uint64_t>(is, "record count");
  h.config_hash = binio::read_pod<std::uint64_t>(is, "config hash");
  return h;
}

}  // namespace

FeatureArchiveHeader peek_feature_archive(const std::string& path) {
  auto is = binio::open_in(path);
  return read_feat_header(is, path);
}

std::vector<feat::FeatureMatrix> read_feature_archive(
    const std::string& path, FeatureArchiveHeader* header) {
  auto is = binio::open_in(path);
  const FeatureArchiveHeader h = read_feat_header(is, path);
  if (header) *header = h;
  std::vector<feat::FeatureMatrix> out;
  out.reserve(h.count);
  for (std::uint64_t r = 0; r < h.count; ++r) {
    feat::FeatureMatrix f;
    f.kind = h.kind;
    f.utterance_id = binio::read_string(is, "utterance id");
    int frames = h.m_frames;
    if (frames == 0)
      frames = static_cast<int>(binio::read_pod<std::uint32_t>(is, "frames"));
    if (frames < 1) throw DataError(path + ": record with no frames");
    f.values.resize(h.n_coeffs, frames);
    for (int i = 0; i < h.n_coeffs; ++i)
      for (int j = 0; j < frames; ++j)
        f.values(i, j) = binio::read_pod<float>(is, "feature data");
    out.push_back(std::move(f));
  }
  return out;
}

// --------------------------------------------------------------------------
// RDXVEC01

void write_xvec_archive(const std::string& path, const XvecArchive& a) {
  if (a.dim < 1) throw DataError("x-vector archive needs a positive dimension");
  auto os = binio::open_out(path);
  binio::write_magic(os, kXvecMagic);
  binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(a.dim));
  binio::write_pod<std::uint64_t>(os, a.records.size());
  binio::write_pod<std::uint64_t>(os, a.config_hash);
  for (const XvecRecord& r : a.records) {
    if (r.vec.size() != a.dim)
      throw DataError("x-vector for " + r.utt_id + " has dimension " +
                      std::to_string(r.vec.size()) + ", archive fixes " +
                      std::to_string(a.dim));
    binio::write_string(os, r.utt_id);
    binio::write_string(os, r.label);
    for (Eigen::Index i = 0; i < r.vec.size(); ++i)
      binio::write_pod<float>(os, r.vec(i));
  }
  if (!os) throw DataError("write failed: " + path);
}

XvecArchive read_xvec_archive(const std::string& path) {
  auto is = binio::open_in(path);
  binio::expect_magic(is, kXvecMagic, path);
  XvecArchive a;
  a.dim = static_cast<int>(binio::read_pod<std::uint32_t>(is, "dimension"));
  if (a.dim < 1) throw DataError(path + ": bad x-vector dimension");
  const auto count = binio::read_pod<std::uint64_t>(is, "record count");
  a.config_hash = binio::read_pod<std::uint64_t>(is, "config hash");
  a.records.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    XvecRecord rec;
    rec.utt_id = binio::read_string(is, "utterance id");
    rec.label = binio::read_string(is, "label");
    rec.vec.resize(a.dim);
    for (int i = 0; i < a.dim; ++i)
      rec.vec(i) = binio::read_pod<float>(is, "x-vector data");
    a.records.push_back(std::move(rec));
  }
  return a;
}

// --------------------------------------------------------------------------
// Text artifacts.  Each starts with a "# config <16 hex>" line so stages can
// refuse inputs produced under a different configuration.

namespace {

void write_config_comment(std::ofstream& os, std::uint64_t config_hash) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "# config %016llx\n",
                static_cast<unsigned long long>(config_hash));
  os << buf;
}

// Consumes a leading comment line if present; returns the parsed hash (0
// when the file has no comment, for compatibility with hand-made files).
bool parse_config_comment(const std::string& line, std::uint64_t* hash) {
  if (line.rfind("# config ", 0) != 0) return false;
  *hash = std::stoull(line.substr(9), nullptr, 16);
  return true;
}

}  // namespace

void save_rescaler(const std::string& path, const feat::Rescaler& r,
                   std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  write_config_comment(os, config_hash);
  char buf[64];
  for (Eigen::Index i = 0; i < r.max_abs.size(); ++i) {
    // %.9g round-trips float32 exactly.
    std::snprintf(buf, sizeof(buf), "%.9g\n", static_cast<double>(r.max_abs(i)));
    os << buf;
  }
  if (!os) throw DataError("write failed: " + path);
}

feat::Rescaler load_rescaler(const std::string& path,
                             std::uint64_t* config_hash) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  if (config_hash) *config_hash = 0;
  std::vector<float> vals;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::uint64_t h = 0;
      if (parse_config_comment(line, &h) && config_hash) *config_hash = h;
      continue;
    }
    try {
      vals.push_back(std::stof(line));
    } catch (const std::exception&) {
      throw DataError(path + ": malformed rescaler line '" + line + "'");
    }
  }
  if (vals.empty()) throw DataError(path + ": empty rescaler file");
  feat::Rescaler r;
  r.max_abs.resize(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    r.max_abs(static_cast<Eigen::Index>(i)) = vals[i];
  return r;
}

void save_scores(const std::string& path,
                 const std::vector<std::pair<std::string, double>>& scores,
                 std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  write_config_comment(os, config_hash);
  char buf[64];
  for (const auto& [id, s] : scores) {
    std::snprintf(buf, sizeof(buf), " %.6f\n", s);
    os << id << buf;
  }
  if (!os) throw DataError("write failed: " + path);
}

std::vector<std::pair<std::string, double>> load_scores(
    const std::string& path, std::uint64_t* config_hash) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  if (config_hash) *config_hash = 0;
  std::vector<std::pair<std::string, double>> out;
  std::string id;
  double s;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::uint64_t h = 0;
      if (parse_config_comment(line, &h) && config_hash) *config_hash = h;
      continue;
    }
    std::istringstream ls(line);
    if (!(ls >> id >> s))
      throw DataError(path + ": malformed score line '" + line + "'");
    out.emplace_back(id, s);
  }
  return out;
}

void save_key(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& key) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  for (const auto& [id, label] : key) os << id << ' ' << label << '\n';
  if (!os) throw DataError("write failed: " + path);
}

std::vector<std::pair<std::string, std::string>> load_key(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, label;
    if (!(ls >> id >> label))
      throw DataError(path + ": malformed key line '" + line + "'");
    out.emplace_back(id, label);
  }
  return out;
}

void save_history(
    const std::string& path,
    const std::vector<std::tuple<int, double, double>>& history) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  char buf[96];
  for (const auto& [epoch, train_loss, val_loss] : history) {
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f\n", epoch, train_loss,
                  val_loss);
    os << buf;
  }
  if (!os) throw DataError("write failed: " + path);
}

}  // namespace rd::archive
