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

#include "vec3.h"

namespace svx {

//============================================================================
// Causal masks.
//
// Kernel positions are flattened in raster order over the offsets
// (dx, dy, dz), dx slowest.  A position with flat index j reads the input at
// q + offset(j) when producing output q, so positions before the centre look
// at voxels that precede q in the block raster scan.  Type A keeps only those
// positions; type B also keeps the centre.

enum class MaskType : uint8_t
{
  kA = 0,
  kB = 1,
};

// One entry per flattened kernel position, 1 = active.  Dimensions must be
// odd and positive (std::invalid_argument otherwise).
std::vector<uint8_t> buildMask(const Vec3i& dims, MaskType type);

// Spatial offset of a flattened kernel position relative to the centre.
Vec3i kernelOffset(int flatIndex, const Vec3i& dims);

// Active kernel positions with their offsets, ascending flat index.  This is
// also the fixed summation order of every convolution.
struct KernelTaps {
  std::vector<int> positions;
  std::vector<Vec3i> offsets;

  static KernelTaps make(const Vec3i& dims, MaskType type);
  size_t size() const { return positions.size(); }
};

//============================================================================

template<typename T>
struct SparseTensor {
  int blockSize = 0;
  int channels = 0;
  // Unique, sorted in raster order.
  std::vector<Vec3i> coords;
  // coords.size() rows of `channels` values.
  std::vector<T> feats;

  size_t size() const { return coords.size(); }
  std::span<T> row(size_t i) { return {feats.data() + i * channels, size_t(channels)}; }
  std::span<const T> row(size_t i) const
  {
    return {feats.data() + i * channels, size_t(channels)};
  }

  // Checks the structural invariants; throws std::invalid_argument.
  void validate() const;
};

template<typename T>
struct MaskedKernel {
  Vec3i dims{3, 3, 3};
  int inChannels = 0;
  int outChannels = 0;
  MaskType maskType = MaskType::kB;
  // [position][in][out]
  std::vector<T> weights;
  std::vector<T> bias;

  static MaskedKernel
  zeros(const Vec3i& dims, int inChannels, int outChannels, MaskType type);

  int kernelSize() const { return dims.x * dims.y * dims.z; }
  T* tap(int position) { return weights.data() + size_t(position) * inChannels * outChannels; }
  const T* tap(int position) const
  {
    return weights.data() + size_t(position) * inChannels * outChannels;
  }

  // Zeroes every masked-out position.
  void applyMask();
};

// Masked sparse convolution.
//
//   out[q] = bias + sum over active positions j with q + offset(j) in the
//            input of  W[j]^T in[q + offset(j)]
//
// Non-generative: the output coordinates are the input coordinates.
// Generative: the output coordinates are { p - offset(j) } over input
// coordinates p and active positions j, clipped to the block; these are the
// voxels for which at least one active tap sees an input coordinate.
template<typename T>
SparseTensor<T> sparseConv(
  const SparseTensor<T>& input, const MaskedKernel<T>& kernel, bool generative);

// Dense blockSize^3 x channels grid in raster order; absent coordinates are
// zero.
template<typename T>
std::vector<T> sparseToDense(const SparseTensor<T>& input);

//============================================================================
// Network topology:
//
//   occupied voxels (feature 1)
//   -> generative type A conv (filters, k) -> ReLU
//   -> residualBlocks x [type B conv -> ReLU -> type B conv -> + skip -> ReLU]
//   -> sparse to dense
//   -> 1x1x1 conv to 3 * mixtures raw parameters per voxel

struct NetworkConfig {
  int blockSize = 64;
  int mixtures = 5;
  int filters = 64;
  int kernel = 3;
  int residualBlocks = 2;

  int outputChannels() const { return 3 * mixtures; }
  void validate() const;

  // Small configuration used by tests and desk-scale experiments.
  static NetworkConfig toy();

  bool operator==(const NetworkConfig&) const = default;
};

template<typename T>
struct ResidualWeights {
  MaskedKernel<T> first;
  MaskedKernel<T> second;
};

template<typename T>
struct ModelWeights {
  NetworkConfig config;
  MaskedKernel<T> stem;
  std::vector<ResidualWeights<T>> residual;
  // [filters][outputs]
  std::vector<T> headWeights;
  std::vector<T> headBias;

  static ModelWeights zeros(const NetworkConfig& cfg);

  // Every parameter tensor in declared topology order: stem weights, stem
  // bias, then per residual block first/second weights and biases, then head
  // weights and head bias.
  std::vector<std::span<T>> tensors();
  std::vector<std::span<const T>> tensors() const;
  size_t parameterCount() const;

  void applyMasks();

  template<typename U>
  ModelWeights<U> cast() const;
};

// He-uniform initialisation with fan-in counted over active kernel positions.
// Biases start at zero unless randomBias is set (used by tests to make
// bias-driven paths observable).
ModelWeights<float>
initializeWeights(const NetworkConfig& cfg, uint64_t seed, bool randomBias = false);

//============================================================================
// Raster-indexed lookup from a voxel to a tensor row (-1 when absent).

class RowIndex {
public:
  RowIndex() = default;
  explicit RowIndex(int blockSize);

  int32_t operator[](int64_t raster) const { return _rows[size_t(raster)]; }
  int32_t& operator[](int64_t raster) { return _rows[size_t(raster)]; }
  int blockSize() const { return _d; }

private:
  int _d = 0;
  std::vector<int32_t> _rows;
};

template<typename T>
struct ForwardPass {
  struct ResidualActivations {
    std::vector<T> pre1, out1, pre2, sum, out;
  };

  int blockSize = 0;
  int filters = 0;
  int outputs = 0;

  std::vector<Vec3i> occupied;
  RowIndex occupiedIndex;

  // Coordinates generated by the first layer, raster order.
  std::vector<Vec3i> coords;
  RowIndex index;

  std::vector<T> stemPre, stemOut;
  std::vector<ResidualActivations> residual;
  // coords.size() x outputs raw parameters.
  std::vector<T> head;
  // Parameters of every voxel that the first layer did not generate.
  std::vector<T> headBias;

  // Raw mixture parameters at a voxel.
  std::span<const T> params(int64_t raster) const;
  std::span<const T> params(const Vec3i& c) const;

  // blockSize^3 x outputs grid.
  std::vector<T> denseParams() const;

  const std::vector<T>& hidden() const
  {
    return residual.empty() ? stemOut : residual.back().out;
  }

  // One flag per ReLU input (> 0).  Two inputs with equal patterns lie in the
  // same linear region of the network.
  std::vector<uint8_t> activationPattern() const;
};

// occupied must be unique coordinates inside [0, blockSize)^3 (any order).
template<typename T>
ForwardPass<T> forward(
  const ModelWeights<T>& weights, std::span<const Vec3i> occupied, int blockSize);

// Reverse-mode gradients.  memberGrad holds d loss / d params for every
// generated coordinate (coords.size() x outputs); biasOnlyGrad is the sum
// of d loss / d params over all other voxels.
template<typename T>
ModelWeights<T> backward(
  const ModelWeights<T>& weights,
  const ForwardPass<T>& pass,
  std::span<const T> memberGrad,
  std::span<const T> biasOnlyGrad);

// Same, from a dense blockSize^3 x outputs gradient grid.
template<typename T>
ModelWeights<T> backward(
  const ModelWeights<T>& weights,
  const ForwardPass<T>& pass,
  std::span<const T> denseGrad);

//============================================================================
// Raster-order evaluation for decoding.
//
// predict(i) returns the parameters that forward() would produce at voxel i
// given the voxels marked so far.  Only layer outputs at voxels <= i are ever
// needed, so every layer is evaluated one voxel at a time with the same row
// kernels as forward(); results are bit-identical.

template<typename T>
class IncrementalPredictor {
public:
  IncrementalPredictor(const ModelWeights<T>& weights, int blockSize);

  // Indices must be visited in increasing order.
  std::span<const T> predict(int64_t raster);

  // Marks the most recently predicted voxel as occupied.
  void markOccupied();

private:
  const ModelWeights<T>& _w;
  int _d;
  KernelTaps _stemTaps;
  KernelTaps _resTaps;
  std::vector<uint8_t> _occupied;
  RowIndex _index;
  std::vector<T> _stem;
  std::vector<std::vector<T>> _out1;
  std::vector<std::vector<T>> _out;
  std::vector<T> _params;
  std::vector<T> _scratch;
  int64_t _last = -1;
};

//============================================================================
// Weight file: "SVXW", u32 version, u32 config record (blockSize, mixtures,
// filters, kernel, residualBlocks), float32 tensors in topology order, then a
// u64 FNV-1a checksum of everything before it.  All little-endian.

std::vector<uint8_t> serializeWeights(const ModelWeights<float>& weights);
ModelWeights<float> parseWeights(std::span<const uint8_t> bytes);

// Checksum that identifies a model in bitstream headers.
uint64_t weightsChecksum(const ModelWeights<float>& weights);

uint64_t fnv1a64(std::span<const uint8_t> bytes);

}  // namespace svx
