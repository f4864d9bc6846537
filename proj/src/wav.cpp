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

#include "rd/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace rd {
namespace {

constexpr std::uint16_t kFormatPcm = 1;

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path);

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    throw DataError("not a RIFF file: " + path);
  read_u32(in);  // total size, unused
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    throw DataError("not a WAVE file: " + path);

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  Waveform w;

  while (in.read(tag, 4)) {
    std::uint32_t chunk_size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw DataError("WAV data chunk before fmt chunk: " + path);
      if (format != kFormatPcm)
        throw DataError("unsupported WAV format (PCM required): " + path);
      if (bits != 16)
        throw DataError("unsupported WAV bit depth (16-bit required): " + path);
      if (channels != 1)
        throw DataError("unsupported WAV channel count (mono required): " + path);
      std::uint32_t n = chunk_size / 2;
      std::vector<std::int16_t> raw(n);
      in.read(reinterpret_cast<char*>(raw.data()), 2 * n);
      if (!in) throw DataError("truncated WAV data chunk: " + path);
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(n);
      for (std::uint32_t i = 0; i < n; ++i)
        w.samples[i] = static_cast<float>(raw[i]) / 32768.0f;
      return w;
    } else {
      // Skip unknown chunk (word-aligned).
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw DataError("WAV file has no data chunk: " + path);
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create WAV file: " + path);

  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = 2 * n;

  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, kFormatPcm);
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  write_u16(out, 2);   // block align
  write_u16(out, 16);  // bits per sample
  out.write("data", 4);
  write_u32(out, data_bytes);

  std::vector<std::int16_t> raw(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    float v = std::clamp(w.samples[i], -1.0f, 1.0f);
    long q = std::lround(static_cast<double>(v) * 32768.0);
    raw[i] = static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), data_bytes);
  if (!out) throw DataError("short write to WAV file: " + path);
}

}  // namespace rd
