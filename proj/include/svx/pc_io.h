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
#include <filesystem>
#include <span>
#include <vector>

#include "vec3.h"

namespace svx {

//============================================================================
// Voxelized geometry: a set of distinct non-negative integer points that all
// lie inside [0, 2^bitDepth)^3.  Points are kept sorted in (x, y, z)
// lexicographic order so that equality is set equality.

struct PointCloud {
  std::vector<Vec3i> points;
  int bitDepth = 1;

  // Sorts, deduplicates and validates.  bitDepth == 0 infers the smallest
  // depth that holds every point.
  static PointCloud fromPoints(std::vector<Vec3i> pts, int bitDepth = 0);

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  bool operator==(const PointCloud&) const = default;
};

// Smallest b >= 1 such that every coordinate is below 2^b.
int inferBitDepth(std::span<const Vec3i> pts);

// Re-declares the depth of a cloud; points outside the new range are an
// error, never clipped.
PointCloud withBitDepth(PointCloud pc, int bitDepth);

//============================================================================
// A d^3 block of the voxel grid.  occupied holds local coordinates in raster
// order.

struct VoxelBlock {
  Vec3i origin;
  int size = 0;
  std::vector<Vec3i> occupied;

  bool operator==(const VoxelBlock&) const = default;
};

// Raster scan: z varies fastest, then y, then x.
inline int64_t
rasterIndex(const Vec3i& c, int d)
{
  return (int64_t(c.x) * d + c.y) * d + c.z;
}

inline Vec3i
rasterCoord(int64_t i, int d)
{
  return {int32_t(i / (int64_t(d) * d)), int32_t((i / d) % d), int32_t(i % d)};
}

// Checked variants: out-of-range input throws std::out_of_range.
int64_t checkedRasterIndex(const Vec3i& c, int d);
Vec3i checkedRasterCoord(int64_t i, int d);

//============================================================================
// PLY subset: ascii or binary_little_endian, element "vertex" with numeric
// x, y, z properties.  Coordinates are rounded half-up and deduplicated.  A
// "comment bit_depth N" header line, as written by writePly, declares the
// depth explicitly.

PointCloud parsePly(std::span<const uint8_t> bytes);

enum class PlyFormat
{
  kAscii,
  kBinaryLittleEndian,
};

std::vector<uint8_t>
writePly(const PointCloud& pc, PlyFormat format = PlyFormat::kAscii);

std::vector<uint8_t> readFile(const std::filesystem::path& path);
void writeFile(const std::filesystem::path& path, std::span<const uint8_t> bytes);

}  // namespace svx
