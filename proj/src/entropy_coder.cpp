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

#include "svx/entropy_coder.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "svx/errors.h"
#include "svx/prob_model.h"

namespace svx {

namespace {
  constexpr uint32_t kTop = 1u << 24;
}

uint32_t
quantizeProbability(double p1)
{
  if (!(p1 >= kProbabilityFloor && p1 <= 1.0 - kProbabilityFloor))
    throw std::invalid_argument(
      "range coder: probability " + std::to_string(p1) + " outside clipped range");
  return uint32_t(std::lround(p1 * kProbabilityOne));
}

double
codeLengthBits(double p1, int bit)
{
  return -std::log2(bit ? p1 : 1.0 - p1);
}

//============================================================================

void
RangeEncoder::encodeScaled(int bit, uint32_t p1Scaled)
{
  if (p1Scaled == 0 || p1Scaled >= kProbabilityOne)
    throw std::invalid_argument("range coder: degenerate probability");

  const uint32_t bound =
    uint32_t((uint64_t(_range) * (kProbabilityOne - p1Scaled)) >> kProbabilityBits);
  if (bit) {
    _low += bound;
    _range -= bound;
  } else {
    _range = bound;
  }
  while (_range < kTop) {
    _range <<= 8;
    shiftLow();
  }
  _symbols++;
}

void
RangeEncoder::shiftLow()
{
  if (uint32_t(_low) < 0xFF000000u || (_low >> 32) != 0) {
    const uint8_t carry = uint8_t(_low >> 32);
    uint8_t pending = _cache;
    do {
      // The first byte is always zero: the code value lies in [0, 1).
      if (_leadingByte)
        _leadingByte = false;
      else
        _out.push_back(uint8_t(pending + carry));
      pending = 0xFF;
    } while (--_cacheSize != 0);
    _cache = uint8_t(_low >> 24);
  }
  _cacheSize++;
  _low = (_low & 0x00FFFFFFu) << 8;
}

std::vector<uint8_t>
RangeEncoder::finish()
{
  for (int i = 0; i < 5; i++)
    shiftLow();
  return std::move(_out);
}

//============================================================================

RangeDecoder::RangeDecoder(std::span<const uint8_t> payload) : _in(payload)
{
  if (_in.size() < 4)
    throw CorruptBitstream("range decoder: payload shorter than 4 bytes");
  for (int i = 0; i < 4; i++)
    _code = (_code << 8) | _in[_pos++];
}

uint8_t
RangeDecoder::nextByte()
{
  if (_pos >= _in.size())
    throw CorruptBitstream("range decoder: payload exhausted");
  return _in[_pos++];
}

int
RangeDecoder::decodeScaled(uint32_t p1Scaled)
{
  if (p1Scaled == 0 || p1Scaled >= kProbabilityOne)
    throw std::invalid_argument("range coder: degenerate probability");

  const uint32_t bound =
    uint32_t((uint64_t(_range) * (kProbabilityOne - p1Scaled)) >> kProbabilityBits);
  int bit;
  if (_code < bound) {
    _range = bound;
    bit = 0;
  } else {
    _code -= bound;
    _range -= bound;
    bit = 1;
  }
  while (_range < kTop) {
    _range <<= 8;
    _code = (_code << 8) | nextByte();
  }
  return bit;
}

void
RangeDecoder::finish() const
{
  if (_pos != _in.size())
    throw CorruptBitstream(
      "range decoder: " + std::to_string(_in.size() - _pos)
      + " unconsumed payload bytes");
}

}  // namespace svx
