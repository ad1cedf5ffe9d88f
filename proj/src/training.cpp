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

#include "svx/training.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "svx/errors.h"
#include "svx/parallel.h"
#include "svx/partition.h"
#include "svx/prob_model.h"

namespace svx {

void
TrainConfig::validate() const
{
  if (!(learningRate > 0))
    throw std::invalid_argument("train: learning rate must be positive");
  if (batchSize < 1 || accumulationSteps < 1 || patience < 1 || maxEpochs < 1)
    throw std::invalid_argument(
      "train: batch size, accumulation steps, patience and epochs must be positive");
  if (!(validationFraction > 0 && validationFraction <= 0.5))
    throw std::invalid_argument("train: validation fraction must be in (0, 0.5]");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0))
    throw std::invalid_argument("train: invalid Adam hyperparameters");
}

BlockDataset
makeDataset(
  std::span<const PointCloud> clouds, int blockSize, uint64_t seed, double validationFraction)
{
  std::vector<VoxelBlock> blocks;
  for (const auto& pc : clouds) {
    if (pc.empty())
      continue;
    auto part = buildPartition(pc, blockSize);
    for (auto& b : part.blocks)
      blocks.push_back(std::move(b));
  }
  if (blocks.empty())
    throw std::invalid_argument("dataset: no occupied blocks");

  std::mt19937_64 rng(seed);
  std::shuffle(blocks.begin(), blocks.end(), rng);

  size_t nVal = 0;
  if (blocks.size() >= 2)
    nVal = std::clamp<size_t>(
      size_t(std::llround(double(blocks.size()) * validationFraction)), 1, blocks.size() - 1);

  BlockDataset ds;
  ds.validation.assign(
    std::make_move_iterator(blocks.begin()), std::make_move_iterator(blocks.begin() + nVal));
  ds.train.assign(
    std::make_move_iterator(blocks.begin() + nVal), std::make_move_iterator(blocks.end()));
  return ds;
}

//============================================================================
// Augmentation

namespace {

  struct Orientation {
    std::array<int, 3> perm;
    std::array<bool, 3> flip;
  };

  std::vector<Orientation> makeOrientations()
  {
    std::vector<Orientation> out;
    std::array<int, 3> perm{0, 1, 2};
    do {
      // Parity of the permutation.
      int inversions = 0;
      for (int i = 0; i < 3; i++)
        for (int j = i + 1; j < 3; j++)
          inversions += perm[i] > perm[j];
      for (int mask = 0; mask < 8; mask++) {
        const int flips = std::popcount(unsigned(mask));
        if ((inversions + flips) % 2 == 0)
          out.push_back({perm, {bool(mask & 4), bool(mask & 2), bool(mask & 1)}});
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
  }

  const std::vector<Orientation>& orientations()
  {
    static const auto table = makeOrientations();
    return table;
  }

  VoxelBlock sorted(VoxelBlock b)
  {
    std::sort(b.occupied.begin(), b.occupied.end());
    return b;
  }

}  // namespace

VoxelBlock
rotateBlock(const VoxelBlock& block, int orientation)
{
  if (orientation < 0 || orientation >= kOrientations)
    throw std::invalid_argument("rotate: orientation must be in [0, 24)");
  const auto& o = orientations()[size_t(orientation)];
  const int d = block.size;

  VoxelBlock out;
  out.origin = block.origin;
  out.size = d;
  out.occupied.reserve(block.occupied.size());
  for (const auto& c : block.occupied) {
    Vec3i r;
    for (int k = 0; k < 3; k++)
      r[k] = o.flip[k] ? d - 1 - c[o.perm[k]] : c[o.perm[k]];
    out.occupied.push_back(r);
  }
  return sorted(std::move(out));
}

VoxelBlock
rotateZ90(const VoxelBlock& block)
{
  VoxelBlock out = block;
  for (auto& c : out.occupied)
    c = {block.size - 1 - c.y, c.x, c.z};
  return sorted(std::move(out));
}

VoxelBlock
subsampleBlock(const VoxelBlock& block, double keepRate, std::mt19937_64& rng)
{
  if (block.occupied.empty())
    throw std::invalid_argument("subsample: empty block");
  std::bernoulli_distribution keep(std::clamp(keepRate, 0.0, 1.0));
  VoxelBlock out;
  out.origin = block.origin;
  out.size = block.size;
  while (out.occupied.empty()) {
    for (const auto& c : block.occupied)
      if (keep(rng))
        out.occupied.push_back(c);
  }
  return out;
}

VoxelBlock
augment(const VoxelBlock& block, uint64_t seed, const AugmentOptions& opts)
{
  std::mt19937_64 rng(seed);
  const int orientation = opts.rotate ? int(rng() % kOrientations) : 0;
  const double keepRate =
    opts.subsample ? std::uniform_real_distribution<double>(0.5, 1.0)(rng) : 1.0;

  VoxelBlock out = rotateBlock(block, orientation);
  if (keepRate < 1.0)
    out = subsampleBlock(out, keepRate, rng);
  return out;
}

//============================================================================
// Objective

template<typename T>
double
blockNll(const ModelWeights<T>& w, const VoxelBlock& block, ModelWeights<T>* grad)
{
  const int d = block.size;
  const int L = w.config.mixtures;
  const size_t outs = size_t(w.config.outputChannels());
  auto fp = forward<T>(w, block.occupied, d);

  const size_t generated = fp.coords.size();
  std::vector<T> memberGrad(grad ? generated * outs : 0);
  double nll = 0;
  size_t occupiedGenerated = 0;
  for (size_t r = 0; r < generated; r++) {
    const bool label = fp.occupiedIndex[rasterIndex(fp.coords[r], d)] >= 0;
    occupiedGenerated += label;
    std::span<const T> raw{fp.head.data() + r * outs, outs};
    if (grad)
      nll += voxelNllGrad<T>(raw, L, label, std::span<T>(memberGrad).subspan(r * outs, outs));
    else
      nll += voxelNll<T>(raw, L, label);
  }

  const double total = double(d) * d * d;
  const double n1 = double(fp.occupied.size() - occupiedGenerated);
  const double n0 = total - double(generated) - n1;
  std::vector<T> g0(outs), g1(outs), biasGrad(outs);
  nll += n0 * voxelNllGrad<T>(fp.headBias, L, false, g0);
  nll += n1 * voxelNllGrad<T>(fp.headBias, L, true, g1);

  if (grad) {
    for (size_t o = 0; o < outs; o++)
      biasGrad[o] = T(n0 * g0[o] + n1 * g1[o]);
    *grad = backward<T>(w, fp, memberGrad, biasGrad);
  }
  return nll;
}

template double blockNll<float>(const ModelWeights<float>&, const VoxelBlock&, ModelWeights<float>*);
template double blockNll<double>(const ModelWeights<double>&, const VoxelBlock&, ModelWeights<double>*);

//============================================================================

AdamOptimizer::AdamOptimizer(size_t n, double lr, double beta1, double beta2, double epsilon)
  : _lr(lr), _beta1(beta1), _beta2(beta2), _epsilon(epsilon), _m(n, 0.0), _v(n, 0.0)
{}

void
AdamOptimizer::step(ModelWeights<float>& weights, std::span<const double> grad)
{
  if (grad.size() != _m.size())
    throw std::invalid_argument("adam: gradient size mismatch");
  _t++;
  const double c1 = 1 - std::pow(_beta1, double(_t));
  const double c2 = 1 - std::pow(_beta2, double(_t));
  size_t i = 0;
  for (auto tensor : weights.tensors()) {
    for (auto& w : tensor) {
      const double g = grad[i];
      _m[i] = _beta1 * _m[i] + (1 - _beta1) * g;
      _v[i] = _beta2 * _v[i] + (1 - _beta2) * g * g;
      const double mhat = _m[i] / c1;
      const double vhat = _v[i] / c2;
      w = float(w - _lr * mhat / (std::sqrt(vhat) + _epsilon));
      i++;
    }
  }
  weights.applyMasks();
}

//============================================================================

std::pair<double, double>
datasetNllBits(
  const ModelWeights<float>& weights, std::span<const VoxelBlock> blocks, int threads)
{
  std::vector<double> nll(blocks.size());
  parallelFor(blocks.size(), threads, [&](size_t i) {
    nll[i] = blockNll<float>(weights, blocks[i]);
  });
  double bits = 0, voxels = 0, occupied = 0;
  for (size_t i = 0; i < blocks.size(); i++) {
    bits += natsToBits(nll[i]);
    voxels += std::pow(double(blocks[i].size), 3);
    occupied += double(blocks[i].occupied.size());
  }
  if (blocks.empty())
    return {0.0, 0.0};
  return {bits / voxels, bits / occupied};
}

namespace {

  void flatten(const ModelWeights<float>& g, double scale, std::vector<double>& acc)
  {
    size_t i = 0;
    for (auto t : g.tensors())
      for (float v : t)
        acc[i++] += scale * double(v);
  }

  bool allFinite(std::span<const double> v)
  {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  }

}  // namespace

TrainResult
train(
  const BlockDataset& dataset,
  const ModelWeights<float>& initial,
  const TrainConfig& cfg,
  const std::function<void(const EpochMetrics&)>& onEpoch)
{
  cfg.validate();
  if (dataset.train.empty())
    throw std::invalid_argument("train: empty training split");
  for (const auto& b : dataset.train)
    if (b.occupied.empty())
      throw std::invalid_argument("train: empty block in dataset");

  const auto& validation = dataset.validation.empty() ? dataset.train : dataset.validation;
  const size_t nParams = initial.parameterCount();
  const AugmentOptions augOpts{cfg.rotate, cfg.subsample};

  TrainResult result;
  ModelWeights<float> weights = initial;
  weights.applyMasks();
  result.weights = weights;
  double bestVal = std::numeric_limits<double>::infinity();
  int sinceBest = 0;

  AdamOptimizer adam(nParams, cfg.learningRate, cfg.beta1, cfg.beta2, cfg.epsilon);
  std::vector<double> accum(nParams, 0.0);
  int accumulated = 0;
  std::mt19937_64 rng(cfg.seed);

  auto applyUpdate = [&](int epoch) {
    for (auto& g : accum)
      g /= accumulated;
    if (!allFinite(accum))
      throw TrainingDiverged(
        "training diverged: non-finite gradient in epoch " + std::to_string(epoch)
        + " after " + std::to_string(adam.steps()) + " optimizer steps");
    adam.step(weights, accum);
    std::fill(accum.begin(), accum.end(), 0.0);
    accumulated = 0;
  };

  for (int epoch = 1; epoch <= cfg.maxEpochs; epoch++) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<size_t> order(dataset.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    double trainBits = 0, trainVoxels = 0, trainOccupied = 0;
    for (size_t start = 0; start < order.size(); start += size_t(cfg.batchSize)) {
      const size_t count = std::min(order.size() - start, size_t(cfg.batchSize));
      std::vector<VoxelBlock> batch(count);
      for (size_t k = 0; k < count; k++) {
        const auto& src = dataset.train[order[start + k]];
        const uint64_t seed = rng();
        batch[k] = (cfg.rotate || cfg.subsample) ? augment(src, seed, augOpts) : src;
      }

      std::vector<ModelWeights<float>> grads(count);
      std::vector<double> nll(count);
      parallelFor(count, cfg.threads, [&](size_t k) {
        nll[k] = blockNll<float>(weights, batch[k], &grads[k]);
      });

      for (size_t k = 0; k < count; k++) {
        if (!std::isfinite(nll[k]))
          throw TrainingDiverged(
            "training diverged: non-finite loss in epoch " + std::to_string(epoch)
            + " on training block " + std::to_string(order[start + k]));
        trainBits += natsToBits(nll[k]);
        trainVoxels += std::pow(double(batch[k].size), 3);
        trainOccupied += double(batch[k].occupied.size());
        flatten(grads[k], 1.0 / double(count), accum);
      }
      if (++accumulated == cfg.accumulationSteps)
        applyUpdate(epoch);
    }
    if (accumulated > 0)
      applyUpdate(epoch);

    EpochMetrics m;
    m.epoch = epoch;
    m.trainBitsPerVoxel = trainBits / trainVoxels;
    m.trainBpov = trainBits / trainOccupied;
    std::tie(m.validationBitsPerVoxel, m.validationBpov) =
      datasetNllBits(weights, validation, cfg.threads);
    if (!std::isfinite(m.validationBitsPerVoxel))
      throw TrainingDiverged(
        "training diverged: non-finite validation loss in epoch " + std::to_string(epoch));
    m.optimizerSteps = adam.steps();
    m.improved = m.validationBitsPerVoxel < bestVal;
    if (m.improved) {
      bestVal = m.validationBitsPerVoxel;
      result.weights = weights;
      result.bestEpoch = epoch;
      sinceBest = 0;
    } else {
      sinceBest++;
    }
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(m);
    if (onEpoch)
      onEpoch(m);
    if (sinceBest >= cfg.patience) {
      result.stoppedEarly = true;
      break;
    }
  }
  return result;
}

}  // namespace svx
