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

#include <cmath>
#include <random>

#include "doctest.h"
#include "svx/entropy_coder.h"
#include "svx/errors.h"
#include "svx/prob_model.h"

using namespace svx;

namespace {

struct Sequence {
  std::vector<double> p1;
  std::vector<int> bits;
  double idealBits = 0;
};

// Bits drawn from their own probabilities, as in real coding.
Sequence
randomSequence(std::mt19937_64& rng, size_t n, bool skewed)
{
  std::uniform_real_distribution<double> u(0, 1);
  Sequence s;
  for (size_t i = 0; i < n; i++) {
    double p = u(rng);
    if (skewed)
      p = std::pow(p, 6.0);
    p = std::clamp(p, kProbabilityFloor, 1 - kProbabilityFloor);
    const int bit = u(rng) < p;
    s.p1.push_back(p);
    s.bits.push_back(bit);
    s.idealBits += -std::log2(bit ? p : 1 - p);
  }
  return s;
}

std::vector<uint8_t>
encodeAll(const Sequence& s)
{
  RangeEncoder enc;
  for (size_t i = 0; i < s.bits.size(); i++)
    enc.encode(s.bits[i], s.p1[i]);
  return enc.finish();
}

std::vector<int>
decodeAll(std::span<const uint8_t> payload, const std::vector<double>& p1)
{
  RangeDecoder dec(payload);
  std::vector<int> out;
  for (double p : p1)
    out.push_back(dec.decode(p));
  return out;
}

}  // namespace

TEST_CASE("probability quantisation")
{
  CHECK(quantizeProbability(0.5) == 32768);
  CHECK(quantizeProbability(kProbabilityFloor) == 2);
  CHECK(quantizeProbability(1 - kProbabilityFloor) == 65534);
  CHECK_THROWS_AS(quantizeProbability(0.0), std::invalid_argument);
  CHECK_THROWS_AS(quantizeProbability(1.0), std::invalid_argument);
  CHECK_THROWS_AS(quantizeProbability(kProbabilityFloor / 2), std::invalid_argument);
  CHECK_THROWS_AS(quantizeProbability(NAN), std::invalid_argument);
}

TEST_CASE("coin flips cost one bit each")
{
  std::mt19937_64 rng(1);
  Sequence s;
  for (int i = 0; i < 8000; i++) {
    s.p1.push_back(0.5);
    s.bits.push_back(int(rng() & 1));
  }
  auto payload = encodeAll(s);
  CHECK(payload.size() >= 1000);
  CHECK(payload.size() <= 1000 + 8);
  CHECK(decodeAll(payload, s.p1) == s.bits);
}

TEST_CASE("skewed run of ones")
{
  Sequence s;
  s.p1.assign(1000, 0.99);
  s.bits.assign(1000, 1);
  auto payload = encodeAll(s);
  const double ideal = 1000 * -std::log2(0.99);
  CHECK(payload.size() <= std::ceil(ideal / 8) + 8);
  CHECK(decodeAll(payload, s.p1) == s.bits);
}

TEST_CASE("short and empty streams")
{
  RangeEncoder empty;
  auto payload = empty.finish();
  CHECK(payload.size() <= 8);
  RangeDecoder dec(payload);
  CHECK_NOTHROW(dec.finish());

  for (int bit : {0, 1}) {
    RangeEncoder one;
    one.encode(bit, 0.3);
    auto p = one.finish();
    CHECK(p.size() <= 8);
    RangeDecoder d(p);
    CHECK(d.decode(0.3) == bit);
    CHECK_NOTHROW(d.finish());
  }
}

TEST_CASE("round trip and near-optimality on random sequences")
{
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; trial++) {
    auto s = randomSequence(rng, 5000 + trial * 1000, trial % 2);
    auto payload = encodeAll(s);
    CHECK(double(payload.size()) * 8 <= s.idealBits + 64);
    CHECK(decodeAll(payload, s.p1) == s.bits);
    CHECK(encodeAll(s) == payload);
  }
}

TEST_CASE("extreme probabilities")
{
  // Long runs against the floor exercise carry propagation.
  Sequence s;
  for (int i = 0; i < 20000; i++) {
    const bool unlikely = i % 97 == 0;
    s.p1.push_back(i % 2 ? kProbabilityFloor : 1 - kProbabilityFloor);
    s.bits.push_back(unlikely ? (i % 2 ? 1 : 0) : (i % 2 ? 0 : 1));
    s.idealBits += -std::log2(s.bits.back() ? s.p1.back() : 1 - s.p1.back());
  }
  auto payload = encodeAll(s);
  CHECK(decodeAll(payload, s.p1) == s.bits);
  CHECK(double(payload.size()) * 8 <= s.idealBits + 64);
}

TEST_CASE("decoding errors")
{
  std::mt19937_64 rng(3);
  auto s = randomSequence(rng, 4000, false);
  auto payload = encodeAll(s);

  SUBCASE("truncated payload")
  {
    std::vector<uint8_t> cut(payload.begin(), payload.begin() + payload.size() / 2);
    CHECK_THROWS_AS(decodeAll(cut, s.p1), CorruptBitstream);
  }
  SUBCASE("trailing bytes")
  {
    auto longer = payload;
    longer.push_back(0);
    RangeDecoder dec(longer);
    for (double p : s.p1)
      dec.decode(p);
    CHECK_THROWS_AS(dec.finish(), CorruptBitstream);
  }
  SUBCASE("too short to initialise")
  {
    std::vector<uint8_t> tiny{1, 2};
    CHECK_THROWS_AS(RangeDecoder{tiny}, CorruptBitstream);
  }
}

TEST_CASE("a wrong probability desynchronises the decoder from that point")
{
  std::mt19937_64 rng(4);
  auto s = randomSequence(rng, 3000, false);
  auto payload = encodeAll(s);
  const size_t k = 1500;
  auto wrong = s.p1;
  wrong[k] = std::clamp(1 - wrong[k], 0.05, 0.95);

  std::vector<int> got;
  try {
    got = decodeAll(payload, wrong);
  } catch (const CorruptBitstream&) {
  }
  // Everything before k is unaffected.
  if (!got.empty()) {
    for (size_t i = 0; i < k; i++)
      CHECK(got[i] == s.bits[i]);
    CHECK(got != s.bits);
  }
}

TEST_CASE("code length helper")
{
  CHECK(codeLengthBits(0.5, 1) == doctest::Approx(1.0));
  CHECK(codeLengthBits(0.25, 0) == doctest::Approx(-std::log2(0.75)));
}
