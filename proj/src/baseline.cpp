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

#include "svx/baseline.h"

#include <algorithm>

#include "svx/entropy_coder.h"
#include "svx/errors.h"
#include "svx/partition.h"
#include "svx/prob_model.h"

namespace svx {

double
AdaptiveBitModel::p1() const
{
  const double p = double(_ones) / double(_zeros + _ones);
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

Order0Stream
encodeOrder0(const PointCloud& pc, int blockSize)
{
  auto part = buildPartition(pc, blockSize);

  Order0Stream out;
  out.bitDepth = pc.bitDepth;
  out.blockSize = blockSize;
  out.points = pc.size();
  out.octree = serializePartition(part.partition);

  const int d = blockSize;
  const size_t n = size_t(d) * d * d;
  std::vector<uint8_t> lab(n);
  AdaptiveBitModel model;
  RangeEncoder enc;
  for (const auto& b : part.blocks) {
    std::fill(lab.begin(), lab.end(), 0);
    for (const auto& c : b.occupied)
      lab[size_t(rasterIndex(c, d))] = 1;
    for (size_t i = 0; i < n; i++) {
      enc.encode(lab[i], model.p1());
      model.update(lab[i]);
    }
  }
  out.payload = enc.finish();
  return out;
}

PointCloud
decodeOrder0(const Order0Stream& stream)
{
  const int d = stream.blockSize;
  auto part = deserializePartition(stream.octree, stream.bitDepth, d);
  auto origins = leafOrigins(part);

  const int64_t n = int64_t(d) * d * d;
  AdaptiveBitModel model;
  RangeDecoder dec(stream.payload);
  std::vector<Vec3i> pts;
  for (const auto& origin : origins) {
    for (int64_t i = 0; i < n; i++) {
      const int bit = dec.decode(model.p1());
      model.update(bit);
      if (bit)
        pts.push_back(origin + rasterCoord(i, d));
    }
  }
  dec.finish();
  return PointCloud::fromPoints(std::move(pts), stream.bitDepth);
}

}  // namespace svx
