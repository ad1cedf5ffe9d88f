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
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "pc_io.h"
#include "sparse_nn.h"

namespace svx {

//============================================================================

struct TrainConfig {
  double learningRate = 1e-4;
  int batchSize = 8;
  int accumulationSteps = 16;
  int patience = 5;
  int maxEpochs = 100;
  double validationFraction = 0.1;
  bool rotate = true;
  bool subsample = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  uint64_t seed = 1;
  // Workers for per-block gradients; results do not depend on this.
  int threads = 1;

  // Throws std::invalid_argument.
  void validate() const;
};

struct BlockDataset {
  std::vector<VoxelBlock> train;
  std::vector<VoxelBlock> validation;

  size_t size() const { return train.size() + validation.size(); }
};

// Every occupied block of every cloud, shuffled by seed, then split.  With a
// single block the validation split is empty.
BlockDataset makeDataset(
  std::span<const PointCloud> clouds, int blockSize, uint64_t seed,
  double validationFraction = 0.1);

//============================================================================
// Augmentation

// The 24 proper rotations of the cube, as (axis permutation, axis flips).
// Orientation 0 is the identity.
VoxelBlock rotateBlock(const VoxelBlock& block, int orientation);
inline constexpr int kOrientations = 24;

// Quarter turn about the z axis: (x, y, z) -> (d - 1 - y, x, z).
VoxelBlock rotateZ90(const VoxelBlock& block);

// Keeps each voxel with probability keepRate; redrawn until non-empty.
VoxelBlock subsampleBlock(const VoxelBlock& block, double keepRate, std::mt19937_64& rng);

struct AugmentOptions {
  bool rotate = true;
  bool subsample = true;
};

// Random orientation and keep-rate uniform in [0.5, 1].
VoxelBlock augment(const VoxelBlock& block, uint64_t seed, const AugmentOptions& opts = {});

//============================================================================
// Objective

// Summed NLL of a block in nats.  When grad is given it receives d NLL / d w
// (same shapes as the weights).  Voxels outside the generated set share the
// head bias parameters and are handled collectively.
template<typename T>
double blockNll(
  const ModelWeights<T>& weights, const VoxelBlock& block, ModelWeights<T>* grad = nullptr);

//============================================================================
// Adam over a flat view of every tensor.

class AdamOptimizer {
public:
  AdamOptimizer(size_t parameters, double lr, double beta1, double beta2, double epsilon);

  void step(ModelWeights<float>& weights, std::span<const double> grad);
  int64_t steps() const { return _t; }

private:
  double _lr, _beta1, _beta2, _epsilon;
  int64_t _t = 0;
  std::vector<double> _m, _v;
};

//============================================================================

struct EpochMetrics {
  int epoch = 0;
  // NLL per voxel and per occupied voxel, in bits.
  double trainBitsPerVoxel = 0;
  double trainBpov = 0;
  double validationBitsPerVoxel = 0;
  double validationBpov = 0;
  double seconds = 0;
  int64_t optimizerSteps = 0;
  bool improved = false;
};

struct TrainResult {
  ModelWeights<float> weights;
  std::vector<EpochMetrics> history;
  int bestEpoch = 0;
  bool stoppedEarly = false;
};

// Mean NLL of blocks in bits, per voxel and per occupied voxel.
std::pair<double, double>
datasetNllBits(const ModelWeights<float>& weights, std::span<const VoxelBlock> blocks, int threads = 1);

// Adam on the batch-mean NLL, stepping every accumulationSteps batches,
// early stopping on validation NLL.  Returns the best-validation weights.
// Throws TrainingDiverged on a non-finite loss or gradient.
TrainResult train(
  const BlockDataset& dataset,
  const ModelWeights<float>& initial,
  const TrainConfig& config,
  const std::function<void(const EpochMetrics&)>& onEpoch = {});

}  // namespace svx
