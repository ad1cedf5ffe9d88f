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

#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "svx/errors.h"
#include "svx/partition.h"
#include "test_util.h"

using namespace svx;

namespace {

// Brute-force grouping of points into aligned cells.
std::map<Vec3i, std::set<Vec3i>>
cellsOf(const PointCloud& pc, int d)
{
  std::map<Vec3i, std::set<Vec3i>> cells;
  for (const auto& p : pc.points) {
    Vec3i origin{p.x / d * d, p.y / d * d, p.z / d * d};
    cells[origin].insert(p - origin);
  }
  return cells;
}

// Morton key of a block origin, x bit above y above z at every level.
uint64_t
morton(const Vec3i& origin, int d, int levels)
{
  uint64_t key = 0;
  for (int l = levels - 1; l >= 0; l--) {
    int shift = l;
    key = (key << 3) | (uint64_t((origin.x / d >> shift) & 1) << 2)
      | (uint64_t((origin.y / d >> shift) & 1) << 1) | uint64_t((origin.z / d >> shift) & 1);
  }
  return key;
}

}  // namespace

TEST_CASE("single point at 10 bits splits along the first child")
{
  auto pc = PointCloud::fromPoints({{0, 0, 0}}, 10);
  auto res = buildPartition(pc, 64);
  CHECK(res.partition.levels() == 4);
  CHECK(res.partition.nodeBytes == std::vector<uint8_t>{0x80, 0x80, 0x80, 0x80});
  CHECK(serializePartition(res.partition) == std::vector<uint8_t>{0x80, 0x80, 0x80, 0x80});
  REQUIRE(res.blocks.size() == 1);
  CHECK(res.blocks[0].origin == Vec3i{0, 0, 0});
  CHECK(res.blocks[0].size == 64);
  CHECK(res.blocks[0].occupied == std::vector<Vec3i>{{0, 0, 0}});
}

TEST_CASE("clouds no deeper than the block size form a single block")
{
  auto pc = PointCloud::fromPoints({{0, 0, 0}, {63, 1, 2}}, 6);
  auto res = buildPartition(pc, 64);
  CHECK(res.partition.levels() == 0);
  CHECK(serializePartition(res.partition).empty());
  REQUIRE(res.blocks.size() == 1);
  CHECK(res.blocks[0].occupied.size() == 2);

  auto small = PointCloud::fromPoints({{1, 2, 3}}, 3);
  auto res2 = buildPartition(small, 64);
  CHECK(res2.partition.levels() == 0);
  REQUIRE(res2.blocks.size() == 1);
  CHECK(res2.blocks[0].occupied == std::vector<Vec3i>{{1, 2, 3}});
}

TEST_CASE("opposite corners occupy two root children")
{
  auto pc = PointCloud::fromPoints({{0, 0, 0}, {512, 512, 512}}, 10);
  auto res = buildPartition(pc, 64);
  REQUIRE(!res.partition.nodeBytes.empty());
  CHECK(res.partition.nodeBytes[0] == 0x81);
  CHECK(std::popcount(res.partition.nodeBytes[0]) == 2);
  CHECK(res.blocks.size() == 2);
  CHECK(res.partition.nodeBytes.size() == 1 + 2 * 3);
}

TEST_CASE("full root node")
{
  std::vector<Vec3i> pts;
  for (int x : {0, 64})
    for (int y : {0, 64})
      for (int z : {0, 64})
        pts.push_back({x, y, z});
  auto res = buildPartition(PointCloud::fromPoints(pts, 7), 64);
  CHECK(res.partition.nodeBytes == std::vector<uint8_t>{0xFF});
  CHECK(res.blocks.size() == 8);
}

TEST_CASE("deserialization")
{
  auto part = deserializePartition(std::vector<uint8_t>{0x80, 0x80, 0x80, 0x80}, 10, 64);
  CHECK(leafOrigins(part) == std::vector<Vec3i>{{0, 0, 0}});

  auto single = deserializePartition({}, 6, 64);
  CHECK(leafOrigins(single) == std::vector<Vec3i>{{0, 0, 0}});

  CHECK_THROWS_AS(
    deserializePartition(std::vector<uint8_t>{0x80, 0x00, 0x80, 0x80}, 10, 64), CorruptBitstream);
  CHECK_THROWS_AS(
    deserializePartition(std::vector<uint8_t>{0x80, 0x80, 0x80}, 10, 64), CorruptBitstream);
  CHECK_THROWS_AS(
    deserializePartition(std::vector<uint8_t>{0x80, 0x80, 0x80, 0x80, 0x80}, 10, 64),
    CorruptBitstream);
  CHECK_THROWS_AS(deserializePartition(std::vector<uint8_t>{0x01}, 6, 64), CorruptBitstream);
}

TEST_CASE("partition properties on random clouds")
{
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; trial++) {
    const int depth = 6 + trial % 5;
    const int d = 1 << (2 + trial % 4);
    const size_t n = 1 + rng() % 2000;
    auto pc = PointCloud::fromPoints(test::randomPoints(rng, depth, n), depth);
    auto res = buildPartition(pc, d);
    const auto& part = res.partition;
    const int levels = part.levels();

    // Blocks agree with a brute-force cell grouping.
    auto cells = cellsOf(pc, d);
    REQUIRE(res.blocks.size() == cells.size());
    for (const auto& b : res.blocks) {
      REQUIRE(cells.count(b.origin));
      CHECK(std::set<Vec3i>(b.occupied.begin(), b.occupied.end()) == cells[b.origin]);
      CHECK(!b.occupied.empty());
    }

    // Leaf order is breadth-first, i.e. increasing Morton key.
    for (size_t i = 1; i < res.blocks.size(); i++)
      CHECK(morton(res.blocks[i - 1].origin, d, levels) < morton(res.blocks[i].origin, d, levels));

    // Node count bounds and no zero bytes.
    const auto bytes = serializePartition(part);
    uint64_t maxNodes = 0;
    for (int l = 0; l < levels; l++)
      maxNodes += uint64_t(1) << (3 * l);
    CHECK(bytes.size() <= maxNodes);
    CHECK(bytes.size() >= size_t(levels));
    for (auto b : bytes)
      CHECK(b != 0);

    // Serialization round trip and decoder-side origins.
    auto back = deserializePartition(bytes, depth, d);
    CHECK(back == part);
    auto origins = leafOrigins(back);
    REQUIRE(origins.size() == res.blocks.size());
    for (size_t i = 0; i < origins.size(); i++)
      CHECK(origins[i] == res.blocks[i].origin);

    // Reassembly reproduces the cloud.
    CHECK(assembleBlocks(res.blocks, depth) == pc);
  }
}

TEST_CASE("partition argument checks")
{
  PointCloud empty;
  empty.bitDepth = 8;
  CHECK_THROWS_AS(buildPartition(empty, 64), std::invalid_argument);
  auto pc = PointCloud::fromPoints({{1, 1, 1}});
  CHECK_THROWS_AS(buildPartition(pc, 48), std::invalid_argument);
  CHECK(log2Exact(64) == 6);
  CHECK_THROWS_AS(log2Exact(0), std::invalid_argument);
}
