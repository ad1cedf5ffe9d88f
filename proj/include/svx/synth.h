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
#include <optional>
#include <string_view>
#include <vector>

#include "pc_io.h"

namespace svx {

//============================================================================
// Procedural voxelized geometry.  Surfaces are sampled at half-voxel steps
// and rounded to the grid, so they come out watertight at one voxel
// thickness.  Every generator is a pure function of its arguments.

enum class ShapeKind
{
  kSphere,   // spherical shell
  kBox,      // surface of a rotated cuboid
  kPlane,    // tilted rectangular patch
  kTorus,    // torus surface
  kTerrain,  // noisy height field
  kSolid,    // filled axis-aligned box
  kUniform,  // uniformly scattered points
};

std::string_view shapeName(ShapeKind kind);
std::optional<ShapeKind> parseShapeKind(std::string_view name);
std::vector<ShapeKind> allShapes();

// A shape with random placement, orientation and size scaled to roughly
// `targetPoints` points (clipped to the grid).
PointCloud synthesizeShape(ShapeKind kind, int bitDepth, size_t targetPoints, uint64_t seed);

// A random member of any family, at most targetPoints points.
PointCloud randomCloud(int bitDepth, size_t targetPoints, uint64_t seed);

// Structured (surface) clouds: the families a learned model should beat an
// order-0 coder on.
std::vector<PointCloud>
structuredCorpus(size_t count, int bitDepth, size_t targetPoints, uint64_t seed);

}  // namespace svx
