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
#include <vector>

#include "pc_io.h"

namespace svx {

//============================================================================
// Order-0 adaptive reference coder: the same octree and block raster scan
// as the learned codec, but every voxel bit is coded with one shared
// adaptive probability (Laplace-smoothed counts, no context).

class AdaptiveBitModel {
public:
  double p1() const;
  void update(int bit) { (bit ? _ones : _zeros)++; }

private:
  uint64_t _zeros = 1;
  uint64_t _ones = 1;
};

struct Order0Stream {
  int bitDepth = 0;
  int blockSize = 64;
  size_t points = 0;
  std::vector<uint8_t> octree;
  // All blocks' voxels in leaf order, one range-coded stream.
  std::vector<uint8_t> payload;

  uint64_t totalBits() const { return 8 * uint64_t(octree.size() + payload.size()); }
  double bpov() const { return points ? double(totalBits()) / double(points) : 0.0; }
};

Order0Stream encodeOrder0(const PointCloud& pc, int blockSize = 64);
PointCloud decodeOrder0(const Order0Stream& stream);

}  // namespace svx
