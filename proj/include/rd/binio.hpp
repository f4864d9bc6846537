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
// Little-endian binary stream helpers shared by the artifact writers.

#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "rd/common.hpp"

namespace rd::binio {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError(std::string("truncated file while reading ") + what);
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const char* what,
                               std::uint32_t max_len = 1u << 20) {
  const auto len = read_pod<std::uint32_t>(is, what);
  if (len > max_len)
    throw DataError(std::string("implausible string length in ") + what);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw DataError(std::string("truncated file while reading ") + what);
  return s;
}

inline void write_magic(std::ostream& os, const char* magic) {
  os.write(magic, static_cast<std::streamsize>(std::string(magic).size()));
}

inline void expect_magic(std::istream& is, const char* magic,
                         const std::string& path) {
  const std::string want(magic);
  std::string got(want.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(want.size()));
  if (!is || got != want)
    throw DataError(path + ": not a " + want + " file");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  return is;
}

}  // namespace rd::binio
