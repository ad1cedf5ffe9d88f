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

#include "svx/prob_model.h"

#include <algorithm>
#include <stdexcept>

#include "svx/errors.h"
#include "svx/pc_io.h"

namespace svx {

namespace {

  template<typename T>
  T sigmoid(T x)
  {
    if (x >= T(0))
      return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
  }

  template<typename T>
  T softplus(T x)
  {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
  }

  // Both tails of the mixture plus the per-component intermediates needed
  // by the gradient.
  template<typename T>
  struct MixtureEval {
    T empty = 0;     // sum pi_l sigmoid(z_l)
    T occupied = 0;  // sum pi_l sigmoid(-z_l)
    std::vector<T> pi, s, z, sig;
  };

  template<typename T>
  MixtureEval<T> evaluate(std::span<const T> raw, int L)
  {
    if (raw.size() != size_t(3 * L))
      throw std::invalid_argument("mixture: expected 3L parameters");

    MixtureEval<T> m;
    m.pi.resize(L);
    m.s.resize(L);
    m.z.resize(L);
    m.sig.resize(L);

    T maxLogit = raw[0];
    for (int l = 1; l < L; l++)
      maxLogit = std::max(maxLogit, raw[l]);
    T norm = 0;
    for (int l = 0; l < L; l++) {
      m.pi[l] = std::exp(raw[l] - maxLogit);
      norm += m.pi[l];
    }
    for (int l = 0; l < L; l++) {
      m.pi[l] /= norm;
      m.s[l] = softplus(raw[2 * L + l]) + T(kScaleFloor);
      m.z[l] = (T(0.5) - raw[L + l]) / m.s[l];
      m.sig[l] = sigmoid(m.z[l]);
      m.empty += m.pi[l] * m.sig[l];
      m.occupied += m.pi[l] * sigmoid(-m.z[l]);
    }
    return m;
  }

}  // namespace

template<typename T>
std::vector<T>
LogisticMixtureParams<T>::weights() const
{
  return evaluate<T>(raw, mixtures).pi;
}

template<typename T>
std::vector<T>
LogisticMixtureParams<T>::scales() const
{
  return evaluate<T>(raw, mixtures).s;
}

template<typename T>
T
occupancyProbabilityRaw(std::span<const T> raw, int mixtures)
{
  auto m = evaluate(raw, mixtures);
  return m.occupied / (m.empty + m.occupied);
}

BitProbability
occupancyProbability(std::span<const float> raw, int mixtures)
{
  for (float v : raw) {
    if (!std::isfinite(v))
      throw ModelError("entropy model produced a non-finite parameter");
  }
  const float p = occupancyProbabilityRaw<float>(raw, mixtures);
  if (!std::isfinite(p))
    throw ModelError("entropy model produced a non-finite probability");
  return {std::clamp(double(p), kProbabilityFloor, 1.0 - kProbabilityFloor)};
}

template<typename T>
T
clippedOccupancy(std::span<const T> raw, int mixtures)
{
  return std::clamp(
    occupancyProbabilityRaw(raw, mixtures), T(kProbabilityFloor),
    T(1) - T(kProbabilityFloor));
}

template<typename T>
T
voxelNll(std::span<const T> raw, int mixtures, bool occupied)
{
  const T p1 = clippedOccupancy(raw, mixtures);
  return occupied ? -std::log(p1) : -std::log1p(-p1);
}

template<typename T>
T
voxelNllGrad(std::span<const T> raw, int L, bool occupiedLabel, std::span<T> grad)
{
  auto m = evaluate(raw, L);
  const T total = m.empty + m.occupied;
  const T p1raw = m.occupied / total;
  const T lo = T(kProbabilityFloor);
  const T hi = T(1) - T(kProbabilityFloor);
  const T p1 = std::clamp(p1raw, lo, hi);
  const T nll = occupiedLabel ? -std::log(p1) : -std::log1p(-p1);

  std::fill(grad.begin(), grad.end(), T(0));
  if (p1raw <= lo || p1raw >= hi)
    return nll;

  // p1 = B / (A + B) with A, B the two tails:
  //   dp1 = (A dB - B dA) / (A + B)^2
  const T dLossDp1 = occupiedLabel ? -T(1) / p1 : T(1) / (T(1) - p1);
  const T scale = dLossDp1 / (total * total);
  const T A = m.empty;
  const T B = m.occupied;

  for (int l = 0; l < L; l++) {
    const T sig = m.sig[l];
    const T sigBar = T(1) - sig;
    const T dSigDz = sig * sigBar;

    // Logits: d pi_k / d logit_l = pi_k (delta_kl - pi_l).
    {
      const T dA = m.pi[l] * (sig - A / total);
      const T dB = m.pi[l] * (sigBar - B / total);
      grad[l] = scale * (A * dB - B * dA);
    }
    // Means: dz / dmu = -1 / s.
    {
      const T dz = -T(1) / m.s[l];
      const T dA = m.pi[l] * dSigDz * dz;
      const T dB = -dA;
      grad[L + l] = scale * (A * dB - B * dA);
    }
    // Scales: dz / ds = -z / s, ds / draw = sigmoid(raw).
    {
      const T dz = -m.z[l] / m.s[l] * sigmoid(raw[2 * L + l]);
      const T dA = m.pi[l] * dSigDz * dz;
      const T dB = -dA;
      grad[2 * L + l] = scale * (A * dB - B * dA);
    }
  }
  return nll;
}

namespace {

  std::vector<uint8_t> labelGrid(int d, std::span<const Vec3i> occupied)
  {
    std::vector<uint8_t> labels(size_t(d) * d * d, 0);
    for (const auto& c : occupied)
      labels[size_t(checkedRasterIndex(c, d))] = 1;
    return labels;
  }

}  // namespace

template<typename T>
T
nllLoss(
  std::span<const T> grid, int L, int d, std::span<const Vec3i> occupied)
{
  const size_t o = size_t(3 * L);
  const auto labels = labelGrid(d, occupied);
  if (grid.size() != labels.size() * o)
    throw std::invalid_argument("nll: parameter grid shape mismatch");
  T loss = 0;
  for (size_t i = 0; i < labels.size(); i++)
    loss += voxelNll<T>(grid.subspan(i * o, o), L, labels[i]);
  return loss;
}

template<typename T>
std::vector<T>
lossGradient(
  std::span<const T> grid, int L, int d, std::span<const Vec3i> occupied)
{
  const size_t o = size_t(3 * L);
  const auto labels = labelGrid(d, occupied);
  if (grid.size() != labels.size() * o)
    throw std::invalid_argument("nll: parameter grid shape mismatch");
  std::vector<T> grad(grid.size());
  for (size_t i = 0; i < labels.size(); i++)
    voxelNllGrad<T>(grid.subspan(i * o, o), L, labels[i], std::span<T>(grad).subspan(i * o, o));
  return grad;
}

#define SVX_INSTANTIATE(T)                                                    \
  template struct LogisticMixtureParams<T>;                                   \
  template T occupancyProbabilityRaw<T>(std::span<const T>, int);             \
  template T clippedOccupancy<T>(std::span<const T>, int);                    \
  template T voxelNll<T>(std::span<const T>, int, bool);                      \
  template T voxelNllGrad<T>(std::span<const T>, int, bool, std::span<T>);    \
  template T nllLoss<T>(std::span<const T>, int, int, std::span<const Vec3i>); \
  template std::vector<T> lossGradient<T>(                                    \
    std::span<const T>, int, int, std::span<const Vec3i>);

SVX_INSTANTIATE(float)
SVX_INSTANTIATE(double)

#undef SVX_INSTANTIATE

}  // namespace svx
