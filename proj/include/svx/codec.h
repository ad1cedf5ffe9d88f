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

#include "partition.h"
#include "pc_io.h"
#include "prob_model.h"
#include "sparse_nn.h"

namespace svx {

//============================================================================
// Bitstream container (all integers little-endian):
//
//   offset  size  field
//        0     4  magic "SVXB"
//        4     1  version (1)
//        5     1  bit depth
//        6     1  log2 block size
//        7     1  kernel size
//        8     2  mixtures
//       10     2  filters
//       12     1  residual blocks
//       13     8  model checksum (weight file FNV-1a)
//       21     4  octree byte count N
//       25     N  octree node bytes
//             4  block count M
//    M times: 4  payload byte count, then the payload
//
// Blocks appear in octree leaf order, so no block origin is transmitted.

struct Bitstream {
  static constexpr uint8_t kVersion = 1;
  static constexpr size_t kHeaderBytes = 21;

  int bitDepth = 0;
  int blockSizeLog2 = 6;
  int kernel = 3;
  int mixtures = 5;
  int filters = 64;
  int residualBlocks = 2;
  uint64_t modelChecksum = 0;
  std::vector<uint8_t> octree;
  std::vector<std::vector<uint8_t>> payloads;

  std::vector<uint8_t> serialize() const;
  // Throws CorruptBitstream on any structural inconsistency.
  static Bitstream parse(std::span<const uint8_t> bytes);

  size_t sizeBytes() const;
};

enum class DecodeStrategy
{
  // Voxel-at-a-time evaluation of every layer (IncrementalPredictor).
  kIncremental,
  // A complete forward pass over the voxels decoded so far, per voxel.
  kFromScratch,
};

struct CodecParams {
  int blockSize = 64;
  int threads = 1;
  DecodeStrategy strategy = DecodeStrategy::kIncremental;
};

struct CodingStats {
  size_t points = 0;
  size_t blocks = 0;
  uint64_t totalBits = 0;
  uint64_t octreeBits = 0;
  uint64_t payloadBits = 0;
  // Header, length fields and block count.
  uint64_t containerBits = 0;
  // Ideal code length of all payloads under the model.
  double modelNllBits = 0;

  double bpov() const { return points ? double(totalBits) / double(points) : 0.0; }
  double octreeShare() const
  {
    return totalBits ? double(octreeBits) / double(totalBits) : 0.0;
  }
};

//============================================================================

// Occupancy distributions of every voxel of a block from one forward pass
// over the complete block.  Causal masking makes each entry equal to the
// conditional given the preceding voxels only.
std::vector<BitProbability>
teacherForcedProbabilities(const VoxelBlock& block, const ModelWeights<float>& weights);

// The same distributions obtained by strictly sequential prediction over the
// voxels preceding each index.
std::vector<BitProbability> sequentialProbabilities(
  const VoxelBlock& block,
  const ModelWeights<float>& weights,
  DecodeStrategy strategy = DecodeStrategy::kIncremental);

// Range-codes the block's d^3 occupancy bits in raster order.  nllBits, when
// given, receives the ideal code length under the model.
std::vector<uint8_t> encodeBlock(
  const VoxelBlock& block, const ModelWeights<float>& weights, double* nllBits = nullptr);

VoxelBlock decodeBlock(
  std::span<const uint8_t> payload,
  const ModelWeights<float>& weights,
  int blockSize,
  const Vec3i& origin = {},
  DecodeStrategy strategy = DecodeStrategy::kIncremental);

Bitstream encodePointCloud(
  const PointCloud& pc,
  const ModelWeights<float>& weights,
  const CodecParams& params = {},
  CodingStats* stats = nullptr);

// Refuses (ModelMismatch) before decoding anything if the bitstream was
// produced with different weights.
PointCloud decodePointCloud(
  const Bitstream& bs, const ModelWeights<float>& weights, const CodecParams& params = {});

// Throws ModelMismatch unless the header matches the weights.
void checkModel(const Bitstream& bs, const ModelWeights<float>& weights);

}  // namespace svx
