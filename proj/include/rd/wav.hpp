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

#pragma once

#include <string>

#include "rd/common.hpp"

namespace rd {

// Mono audio in [-1, +1] float samples.
struct Waveform {
  VecF samples;
  int sample_rate = 16000;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Reads a RIFF/WAVE file.  Only 16-bit signed little-endian PCM, single
// channel, is accepted; anything else raises DataError.  Unknown chunks
// (LIST, fact, ...) are skipped.
Waveform read_wav(const std::string& path);

// Writes 16-bit signed little-endian PCM mono.  Samples are clamped to
// [-1, +1] and rounded to the nearest representable level, so a written file
// re-reads to exactly the quantized values.
void write_wav(const std::string& path, const Waveform& w);

}  // namespace rd
