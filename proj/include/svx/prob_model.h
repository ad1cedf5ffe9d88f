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

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "vec3.h"

namespace svx {

//============================================================================
// Occupancy probabilities from a discretized mixture of logistics.
//
// Each voxel carries 3L raw values laid out as [logits | means | rawScales].
// With pi = softmax(logits) and s = softplus(rawScale) + kScaleFloor, the
// probability of an empty voxel is the mixture CDF at the upper edge of the
// bin of value 0:
//
//   p0 = sum_l pi_l * sigmoid((0.5 - mu_l) / s_l),   p1 = 1 - p0
//
// p1 is evaluated as sum_l pi_l * sigmoid((mu_l - 0.5) / s_l) normalised by
// the sum of both tails, which keeps precision for p1 near zero.

inline constexpr double kProbabilityFloor = 1.0 / 32768;  // 2^-15
inline constexpr float kScaleFloor = 1e-3f;

template<typename T>
struct LogisticMixtureParams {
  std::span<const T> raw;
  int mixtures;

  T logit(int l) const { return raw[l]; }
  T mean(int l) const { return raw[mixtures + l]; }
  T rawScale(int l) const { return raw[2 * mixtures + l]; }

  std::vector<T> weights() const;  // softmax of the logits
  std::vector<T> scales() const;   // softplus + floor
};

// Unclipped probability of occupancy, evaluated in T.
template<typename T>
T occupancyProbabilityRaw(std::span<const T> raw, int mixtures);

// Probability pair handed to the range coder.  p1 lies in
// [kProbabilityFloor, 1 - kProbabilityFloor] and p0() + p1 == 1 exactly.
struct BitProbability {
  double p1 = 0.5;

  double p0() const { return 1.0 - p1; }
  double of(int bit) const { return bit ? p1 : p0(); }
};

// Codec-side evaluation.  Throws ModelError on non-finite parameters.
BitProbability occupancyProbability(std::span<const float> raw, int mixtures);

// Clipped probability in T, as used by the training loss.
template<typename T>
T clippedOccupancy(std::span<const T> raw, int mixtures);

// -ln p(label) for one voxel, in nats.
template<typename T>
T voxelNll(std::span<const T> raw, int mixtures, bool occupied);

// Same, also writing d nll / d raw into grad (3L values, overwritten).
template<typename T>
T voxelNllGrad(std::span<const T> raw, int mixtures, bool occupied, std::span<T> grad);

// Summed NLL (nats) over a dense blockSize^3 x 3L parameter grid; the label
// of voxel i is 1 when it appears in `occupied`.
template<typename T>
T nllLoss(
  std::span<const T> paramsGrid, int mixtures, int blockSize,
  std::span<const Vec3i> occupied);

// d nllLoss / d paramsGrid, same layout as the grid.
template<typename T>
std::vector<T> lossGradient(
  std::span<const T> paramsGrid, int mixtures, int blockSize,
  std::span<const Vec3i> occupied);

inline double
natsToBits(double nats)
{
  return nats / std::log(2.0);
}

}  // namespace svx
