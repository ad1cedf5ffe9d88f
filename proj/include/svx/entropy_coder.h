/* The copyright in this software is being made available under the BSD
 * Licence, included below.  This software may be subject to other third
 * party and contributor rights, including patent rights, and no such
 * rights are granted under this licence.
 *
 * Copyright (c) 2017-2018, ISO/IEC
 * All rights reserved.
 *
 * Redistribution and use in source and binary forms, with or without
 * modification, are permitted provided that the following conditions are met:
 *
 * * Redistributions of source code must retain the above copyright
 *   notice, this list of conditions and the following disclaimer.
 *
 * * Redistributions in binary form must reproduce the above copyright
 *   notice, this list of conditions and the following disclaimer in the
 *   documentation and/or other materials provided with the distribution.
 *
 * * Neither the name of the ISO/IEC nor the names of its contributors
 *   may be used to endorse or promote products derived from this
 *   software without specific prior written permission.
 *
 * THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS "AS IS"
 * AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT LIMITED TO, THE
 * IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS FOR A PARTICULAR PURPOSE
 * ARE DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT HOLDER OR CONTRIBUTORS BE
 * LIABLE FOR ANY DIRECT, INDIRECT, INCIDENTAL, SPECIAL, EXEMPLARY, OR
 * CONSEQUENTIAL DAMAGES (INCLUDING, BUT NOT LIMITED TO, PROCUREMENT OF
 * SUBSTITUTE GOODS OR SERVICES; LOSS OF USE, DATA, OR PROFITS; OR BUSINESS
 * INTERRUPTION) HOWEVER CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN
 * CONTRACT, STRICT LIABILITY, OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE)
 * ARISING IN ANY WAY OUT OF THE USE OF THIS SOFTWARE, EVEN IF ADVISED OF THE
 * POSSIBILITY OF SUCH DAMAGE.
 */

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace svx {

//============================================================================
// Binary range coder driven by externally supplied probabilities.
//
// 64-bit low register (33 bits live), 32-bit range, byte-wise
// renormalisation whenever range drops below 2^24.  Carries are resolved
// through a cached byte plus a run of pending 0xff bytes.  Probabilities are
// quantised to 16-bit fixed point identically on both sides.

inline constexpr int kProbabilityBits = 16;
inline constexpr uint32_t kProbabilityOne = 1u << kProbabilityBits;

// Quantised P(bit = 1).  Throws std::invalid_argument unless p1 lies in
// [2^-15, 1 - 2^-15].
uint32_t quantizeProbability(double p1);

class RangeEncoder {
public:
  void encode(int bit, double p1) { encodeScaled(bit, quantizeProbability(p1)); }
  void encodeScaled(int bit, uint32_t p1Scaled);

  // Flushes the low register.  The encoder must not be used afterwards.
  std::vector<uint8_t> finish();

  uint64_t symbols() const { return _symbols; }

private:
  void shiftLow();

  uint64_t _low = 0;
  uint32_t _range = 0xFFFFFFFFu;
  uint8_t _cache = 0;
  uint64_t _cacheSize = 1;
  bool _leadingByte = true;
  uint64_t _symbols = 0;
  std::vector<uint8_t> _out;
};

class RangeDecoder {
public:
  // Throws CorruptBitstream if the payload is shorter than the initial code
  // register.
  explicit RangeDecoder(std::span<const uint8_t> payload);

  int decode(double p1) { return decodeScaled(quantizeProbability(p1)); }
  int decodeScaled(uint32_t p1Scaled);

  // Verifies that exactly the whole payload was consumed; throws
  // CorruptBitstream otherwise.
  void finish() const;

  size_t consumed() const { return _pos; }

private:
  uint8_t nextByte();

  std::span<const uint8_t> _in;
  size_t _pos = 0;
  uint32_t _code = 0;
  uint32_t _range = 0xFFFFFFFFu;
};

// Ideal code length of the observed bit, in bits.
double codeLengthBits(double p1, int bit);

}  // namespace svx
