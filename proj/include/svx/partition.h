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

#include "pc_io.h"

namespace svx {

//============================================================================
// Octree that signals which blocks of a point cloud are occupied.
//
// One byte per internal node, breadth first.  Within a node byte the most
// significant bit flags child 0, where the child index of a half-space split
// is 4 * xHigh + 2 * yHigh + zHigh.  Leaves are the occupied blocks.

struct OctreePartition {
  int bitDepth = 0;
  int blockSizeLog2 = 6;
  std::vector<uint8_t> nodeBytes;

  int levels() const { return bitDepth > blockSizeLog2 ? bitDepth - blockSizeLog2 : 0; }
  int blockSize() const { return 1 << blockSizeLog2; }

  bool operator==(const OctreePartition&) const = default;
};

struct PartitionResult {
  OctreePartition partition;
  // Non-empty blocks in breadth-first leaf order.
  std::vector<VoxelBlock> blocks;
};

// Throws std::invalid_argument for an empty cloud or a block size that is
// not a power of two.
PartitionResult buildPartition(const PointCloud& pc, int blockSize = 64);

std::vector<uint8_t> serializePartition(const OctreePartition& part);

// Consumes exactly the node bytes; a zero byte, a truncated stream or
// trailing bytes raise CorruptBitstream.
OctreePartition deserializePartition(
  std::span<const uint8_t> bytes, int bitDepth, int blockSize);

// Block origins of the leaves in breadth-first order.
std::vector<Vec3i> leafOrigins(const OctreePartition& part);

// Inverse of the block split: union of every block's points, offset by
// their origins.
PointCloud assembleBlocks(std::span<const VoxelBlock> blocks, int bitDepth);

int log2Exact(int blockSize);

}  // namespace svx
