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

#include "svx/partition.h"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "svx/errors.h"

namespace svx {

namespace {

  // Interleaves block coordinates so that ascending order is breadth-first
  // leaf order: at each level the 3-bit group is 4x + 2y + z.
  uint64_t interleave(const Vec3i& b, int levels)
  {
    uint64_t code = 0;
    for (int l = levels - 1; l >= 0; l--) {
      code = (code << 3) | (uint64_t((b.x >> l) & 1) << 2)
        | (uint64_t((b.y >> l) & 1) << 1) | uint64_t((b.z >> l) & 1);
    }
    return code;
  }

  Vec3i deinterleave(uint64_t code, int levels)
  {
    Vec3i b{0, 0, 0};
    for (int l = 0; l < levels; l++) {
      b.z |= int32_t((code >> (3 * l)) & 1) << l;
      b.y |= int32_t((code >> (3 * l + 1)) & 1) << l;
      b.x |= int32_t((code >> (3 * l + 2)) & 1) << l;
    }
    return b;
  }

}  // namespace

int
log2Exact(int blockSize)
{
  if (blockSize <= 0 || (blockSize & (blockSize - 1)) != 0)
    throw std::invalid_argument(
      "block size " + std::to_string(blockSize) + " is not a power of two");
  int l = 0;
  while ((1 << l) < blockSize)
    l++;
  return l;
}

//============================================================================

PartitionResult
buildPartition(const PointCloud& pc, int blockSize)
{
  if (pc.empty())
    throw std::invalid_argument("partition: empty point cloud");

  PartitionResult res;
  auto& part = res.partition;
  part.bitDepth = pc.bitDepth;
  part.blockSizeLog2 = log2Exact(blockSize);
  const int levels = part.levels();
  const int shift = part.blockSizeLog2;

  // (leaf code, point) pairs sorted by code, then by local raster order.
  std::vector<std::pair<uint64_t, Vec3i>> keyed;
  keyed.reserve(pc.size());
  for (const auto& p : pc.points)
    keyed.emplace_back(interleave(p >> shift, levels), p);
  std::sort(keyed.begin(), keyed.end());

  std::vector<uint64_t> leaves;
  for (size_t i = 0; i < keyed.size();) {
    uint64_t code = keyed[i].first;
    VoxelBlock blk;
    blk.size = blockSize;
    blk.origin = deinterleave(code, levels) << shift;
    for (; i < keyed.size() && keyed[i].first == code; i++)
      blk.occupied.push_back(keyed[i].second - blk.origin);
    leaves.push_back(code);
    res.blocks.push_back(std::move(blk));
  }

  // Node bytes, level by level.  Nodes at depth l are the distinct prefixes
  // leaves >> 3 * (levels - l); their children are the prefixes one level
  // further down.
  for (int l = 0; l < levels; l++) {
    int childShift = 3 * (levels - l - 1);
    uint64_t prevParent = ~uint64_t(0);
    uint64_t prevChild = ~uint64_t(0);
    for (uint64_t leaf : leaves) {
      uint64_t child = leaf >> childShift;
      if (child == prevChild)
        continue;
      prevChild = child;
      uint64_t parent = child >> 3;
      if (parent != prevParent) {
        part.nodeBytes.push_back(0);
        prevParent = parent;
      }
      part.nodeBytes.back() |= uint8_t(0x80 >> (child & 7));
    }
  }
  return res;
}

std::vector<uint8_t>
serializePartition(const OctreePartition& part)
{
  return part.nodeBytes;
}

//============================================================================

namespace {

  // Walks the node bytes breadth first, returning leaf codes and the number
  // of bytes consumed.
  std::vector<uint64_t>
  walkOctree(std::span<const uint8_t> bytes, int levels, size_t* consumed)
  {
    std::vector<uint64_t> nodes{0};
    size_t pos = 0;
    for (int l = 0; l < levels; l++) {
      std::vector<uint64_t> next;
      next.reserve(nodes.size() * 2);
      for (uint64_t node : nodes) {
        if (pos >= bytes.size())
          throw CorruptBitstream("octree: truncated node stream");
        uint8_t occ = bytes[pos++];
        if (occ == 0)
          throw CorruptBitstream(
            "octree: empty node byte at offset " + std::to_string(pos - 1));
        for (int c = 0; c < 8; c++) {
          if (occ & (0x80 >> c))
            next.push_back((node << 3) | uint64_t(c));
        }
      }
      nodes = std::move(next);
    }
    *consumed = pos;
    return nodes;
  }

}  // namespace

OctreePartition
deserializePartition(std::span<const uint8_t> bytes, int bitDepth, int blockSize)
{
  OctreePartition part;
  part.bitDepth = bitDepth;
  part.blockSizeLog2 = log2Exact(blockSize);
  if (bitDepth < 1 || bitDepth > 16)
    throw CorruptBitstream("octree: invalid bit depth");

  size_t consumed = 0;
  walkOctree(bytes, part.levels(), &consumed);
  if (consumed != bytes.size())
    throw CorruptBitstream(
      "octree: " + std::to_string(bytes.size() - consumed) + " trailing bytes");
  part.nodeBytes.assign(bytes.begin(), bytes.end());
  return part;
}

std::vector<Vec3i>
leafOrigins(const OctreePartition& part)
{
  size_t consumed = 0;
  auto leaves = walkOctree(part.nodeBytes, part.levels(), &consumed);
  if (consumed != part.nodeBytes.size())
    throw CorruptBitstream("octree: trailing node bytes");

  std::vector<Vec3i> origins;
  origins.reserve(leaves.size());
  for (uint64_t code : leaves)
    origins.push_back(deinterleave(code, part.levels()) << part.blockSizeLog2);
  return origins;
}

PointCloud
assembleBlocks(std::span<const VoxelBlock> blocks, int bitDepth)
{
  std::vector<Vec3i> pts;
  size_t n = 0;
  for (const auto& b : blocks)
    n += b.occupied.size();
  pts.reserve(n);
  for (const auto& b : blocks) {
    for (const auto& p : b.occupied)
      pts.push_back(b.origin + p);
  }
  return PointCloud::fromPoints(std::move(pts), bitDepth);
}

}  // namespace svx
