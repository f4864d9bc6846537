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
// Network checkpoints (RDNET01): the graph as parseable one-line layer
// descriptors followed by every state tensor (weights, biases, batch-norm
// running statistics) as float32.  Tensors are stored column-major, the
// Eigen default.  No timestamps: rewriting the same network yields a
// byte-identical file.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rd/binio.hpp"
#include "rd/common.hpp"
#include "rd/nnet.hpp"

namespace rd::nnet {

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct SpecArgs {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> kv;

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    throw DataError("layer descriptor '" + kind + "' missing key '" + key + "'");
  }
  int get_int(const std::string& key) const { return std::stoi(get(key)); }
  double get_double(const std::string& key) const { return std::stod(get(key)); }
};

inline SpecArgs parse_spec(const std::string& line) {
  auto toks = split_ws(line);
  if (toks.empty()) throw DataError("empty layer descriptor");
  SpecArgs a;
  a.kind = toks[0];
  for (std::size_t i = 1; i < toks.size(); ++i) {
    const auto eq = toks[i].find('=');
    if (eq == std::string::npos)
      throw DataError("malformed layer descriptor token '" + toks[i] + "'");
    a.kv.emplace_back(toks[i].substr(0, eq), toks[i].substr(eq + 1));
  }
  return a;
}

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::stoi(cur));
  return out;
}

}  // namespace detail

// Reconstructs a layer from its spec() line.
template <typename Scalar>
std::unique_ptr<Layer<Scalar>> layer_from_spec(const std::string& line) {
  const auto a = detail::parse_spec(line);
  if (a.kind == "dense")
    return std::make_unique<DenseLayer<Scalar>>(a.get_int("units"),
                                                a.get_double("l2"));
  if (a.kind == "conv1d")
    return std::make_unique<Conv1dLayer<Scalar>>(
        a.get_int("filters"), a.get_int("kernel"), a.get_double("l2"));
  if (a.kind == "tdnn")
    return std::make_unique<TdnnLayer<Scalar>>(
        a.get_int("units"), detail::parse_int_list(a.get("context")),
        a.get_double("l2"));
  if (a.kind == "batch_norm")
    return std::make_unique<BatchNormLayer<Scalar>>(a.get_double("momentum"),
                                                    a.get_double("eps"));
  if (a.kind == "relu") return std::make_unique<ReluLayer<Scalar>>();
  if (a.kind == "tanh") return std::make_unique<TanhLayer<Scalar>>();
  if (a.kind == "gaussian_noise")
    return std::make_unique<GaussianNoiseLayer<Scalar>>(a.get_double("std"));
  if (a.kind == "max_pool1d")
    return std::make_unique<MaxPool1dLayer<Scalar>>(a.get_int("pool"),
                                                    a.get_int("stride"));
  if (a.kind == "stats_pool") return std::make_unique<StatsPoolLayer<Scalar>>();
  if (a.kind == "flatten") return std::make_unique<FlattenLayer<Scalar>>();
  throw DataError("unknown layer kind '" + a.kind + "'");
}

template <typename Scalar>
void save_network(Network<Scalar>& net, const std::string& path,
                  std::uint64_t config_hash) {
  if (!net.built()) throw DataError("cannot save an unbuilt network");
  auto os = binio::open_out(path);
  binio::write_magic(os, "RDNET01");
  binio::write_pod<std::uint64_t>(os, config_hash);
  binio::write_pod<std::uint64_t>(os, net.seed());
  binio::write_pod<std::int32_t>(os, net.input_shape().channels);
  binio::write_pod<std::int32_t>(
      os, net.input_shape().time ? *net.input_shape().time : -1);
  binio::write_pod<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(net.n_layers()));
  for (int i = 0; i < net.n_layers(); ++i)
    binio::write_string(os, net.layer(i).spec());
  std::vector<Mat<Scalar>*> tensors = net.tensors();
  binio::write_pod<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(tensors.size()));
  for (const Mat<Scalar>* t : tensors) {
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t->rows()));
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t->cols()));
    for (Eigen::Index j = 0; j < t->cols(); ++j)
      for (Eigen::Index i = 0; i < t->rows(); ++i)
        binio::write_pod<float>(os, static_cast<float>((*t)(i, j)));
  }
  if (!os) throw DataError("write failed: " + path);
}

template <typename Scalar>
struct LoadedNetwork {
  std::unique_ptr<Network<Scalar>> net;
  std::uint64_t config_hash = 0;
};

template <typename Scalar>
LoadedNetwork<Scalar> load_network(const std::string& path) {
  auto is = binio::open_in(path);
  binio::expect_magic(is, "RDNET01", path);
  LoadedNetwork<Scalar> out;
  out.config_hash = binio::read_pod<std::uint64_t>(is, "config hash");
  const auto seed = binio::read_pod<std::uint64_t>(is, "seed");
  const auto in_ch = binio::read_pod<std::int32_t>(is, "input channels");
  const auto in_time = binio::read_pod<std::int32_t>(is, "input length");
  const auto n_layers = binio::read_pod<std::uint32_t>(is, "layer count");
  if (n_layers == 0 || n_layers > 1000)
    throw DataError(path + ": implausible layer count");
  out.net = std::make_unique<Network<Scalar>>(seed);
  for (std::uint32_t i = 0; i < n_layers; ++i)
    out.net->add(layer_from_spec<Scalar>(
        binio::read_string(is, "layer descriptor")));
  Shape in{in_ch, in_time < 0 ? std::nullopt : std::optional<int>(in_time)};
  out.net->build(in);
  std::vector<Mat<Scalar>*> tensors = out.net->tensors();
  const auto n_tensors = binio::read_pod<std::uint32_t>(is, "tensor count");
  if (n_tensors != tensors.size())
    throw DataError(path + ": tensor count mismatch (file " +
                    std::to_string(n_tensors) + ", graph " +
                    std::to_string(tensors.size()) + ")");
  for (Mat<Scalar>* t : tensors) {
    const auto rows = binio::read_pod<std::uint32_t>(is, "tensor rows");
    const auto cols = binio::read_pod<std::uint32_t>(is, "tensor cols");
    if (rows != static_cast<std::uint32_t>(t->rows()) ||
        cols != static_cast<std::uint32_t>(t->cols()))
      throw DataError(path + ": tensor shape mismatch");
    for (std::uint32_t j = 0; j < cols; ++j)
      for (std::uint32_t i2 = 0; i2 < rows; ++i2)
        (*t)(i2, j) =
            static_cast<Scalar>(binio::read_pod<float>(is, "tensor data"));
  }
  return out;
}

}  // namespace rd::nnet
