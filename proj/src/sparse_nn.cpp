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

#include "svx/sparse_nn.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

#include "svx/errors.h"
#include "svx/pc_io.h"

namespace svx {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

//============================================================================
// Masks

namespace {

  void checkKernelDims(const Vec3i& dims)
  {
    for (int k = 0; k < 3; k++) {
      if (dims[k] <= 0 || dims[k] % 2 == 0)
        throw std::invalid_argument("kernel dimensions must be odd and positive");
    }
  }

  bool inBlock(const Vec3i& p, int d)
  {
    return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x < d && p.y < d && p.z < d;
  }

}  // namespace

std::vector<uint8_t>
buildMask(const Vec3i& dims, MaskType type)
{
  checkKernelDims(dims);
  const int kernelSize = dims.x * dims.y * dims.z;
  std::vector<uint8_t> mask(size_t(kernelSize), 1);
  const int firstMasked = kernelSize / 2 + (type == MaskType::kB ? 1 : 0);
  std::fill(mask.begin() + firstMasked, mask.end(), 0);
  return mask;
}

Vec3i
kernelOffset(int flatIndex, const Vec3i& dims)
{
  const int kz = flatIndex % dims.z;
  const int ky = (flatIndex / dims.z) % dims.y;
  const int kx = flatIndex / (dims.y * dims.z);
  return {kx - dims.x / 2, ky - dims.y / 2, kz - dims.z / 2};
}

KernelTaps
KernelTaps::make(const Vec3i& dims, MaskType type)
{
  auto mask = buildMask(dims, type);
  KernelTaps taps;
  for (int j = 0; j < int(mask.size()); j++) {
    if (!mask[j])
      continue;
    taps.positions.push_back(j);
    taps.offsets.push_back(kernelOffset(j, dims));
  }
  return taps;
}

//============================================================================

template<typename T>
void
SparseTensor<T>::validate() const
{
  if (blockSize <= 0 || channels < 0)
    throw std::invalid_argument("sparse tensor: invalid shape");
  if (feats.size() != coords.size() * size_t(channels))
    throw std::invalid_argument("sparse tensor: feature rows do not match coordinates");
  for (size_t i = 0; i < coords.size(); i++) {
    if (!inBlock(coords[i], blockSize))
      throw std::invalid_argument("sparse tensor: coordinate outside block");
    if (i && !(coords[i - 1] < coords[i]))
      throw std::invalid_argument("sparse tensor: coordinates not unique and sorted");
  }
}

template<typename T>
MaskedKernel<T>
MaskedKernel<T>::zeros(const Vec3i& dims, int inChannels, int outChannels, MaskType type)
{
  checkKernelDims(dims);
  MaskedKernel k;
  k.dims = dims;
  k.inChannels = inChannels;
  k.outChannels = outChannels;
  k.maskType = type;
  k.weights.assign(size_t(k.kernelSize()) * inChannels * outChannels, T(0));
  k.bias.assign(size_t(outChannels), T(0));
  return k;
}

template<typename T>
void
MaskedKernel<T>::applyMask()
{
  auto mask = buildMask(dims, maskType);
  const size_t slice = size_t(inChannels) * outChannels;
  for (int j = 0; j < kernelSize(); j++) {
    if (!mask[j])
      std::fill_n(weights.begin() + j * slice, slice, T(0));
  }
}

//============================================================================
// Row kernels shared by every evaluation path.  The accumulation order (bias,
// then taps by ascending flat index, then input channels) is what makes
// whole-block and voxel-at-a-time evaluation bit-identical.

namespace {

  template<typename T, typename Lookup>
  inline void convolveRow(
    const MaskedKernel<T>& k,
    const KernelTaps& taps,
    const Vec3i& q,
    int d,
    Lookup&& rowAt,
    T* out)
  {
    const int cin = k.inChannels;
    const int cout = k.outChannels;
    std::copy(k.bias.begin(), k.bias.end(), out);
    for (size_t t = 0; t < taps.size(); t++) {
      const Vec3i p = q + taps.offsets[t];
      if (!inBlock(p, d))
        continue;
      const T* in = rowAt(p);
      if (!in)
        continue;
      const T* w = k.tap(taps.positions[t]);
      for (int ci = 0; ci < cin; ci++) {
        const T a = in[ci];
        if (a == T(0))
          continue;
        const T* wr = w + size_t(ci) * cout;
        for (int co = 0; co < cout; co++)
          out[co] += a * wr[co];
      }
    }
  }

  template<typename T>
  inline void headRow(const ModelWeights<T>& w, const T* h, T* out)
  {
    const int f = w.config.filters;
    const int o = w.config.outputChannels();
    std::copy(w.headBias.begin(), w.headBias.end(), out);
    for (int ci = 0; ci < f; ci++) {
      const T a = h[ci];
      if (a == T(0))
        continue;
      const T* wr = w.headWeights.data() + size_t(ci) * o;
      for (int co = 0; co < o; co++)
        out[co] += a * wr[co];
    }
  }

  template<typename T>
  inline void reluRow(const T* in, T* out, int n)
  {
    for (int i = 0; i < n; i++)
      out[i] = in[i] > T(0) ? in[i] : T(0);
  }

  template<typename T>
  inline void addRow(const T* a, const T* b, T* out, int n)
  {
    for (int i = 0; i < n; i++)
      out[i] = a[i] + b[i];
  }

  template<typename T>
  struct One {
    static constexpr T value = T(1);
  };

}  // namespace

//============================================================================

template<typename T>
SparseTensor<T>
sparseConv(const SparseTensor<T>& input, const MaskedKernel<T>& kernel, bool generative)
{
  input.validate();
  if (input.channels != kernel.inChannels)
    throw std::invalid_argument("sparse conv: channel mismatch");

  const int d = input.blockSize;
  const auto taps = KernelTaps::make(kernel.dims, kernel.maskType);

  RowIndex inIndex(d);
  for (size_t i = 0; i < input.coords.size(); i++)
    inIndex[rasterIndex(input.coords[i], d)] = int32_t(i);

  SparseTensor<T> out;
  out.blockSize = d;
  out.channels = kernel.outChannels;
  if (generative) {
    std::vector<uint8_t> mark(size_t(d) * d * d, 0);
    for (const auto& p : input.coords) {
      for (const auto& off : taps.offsets) {
        Vec3i q = p - off;
        if (inBlock(q, d))
          mark[size_t(rasterIndex(q, d))] = 1;
      }
    }
    for (int64_t r = 0; r < int64_t(mark.size()); r++) {
      if (mark[size_t(r)])
        out.coords.push_back(rasterCoord(r, d));
    }
  } else {
    out.coords = input.coords;
  }

  out.feats.assign(out.coords.size() * size_t(out.channels), T(0));
  auto lookup = [&](const Vec3i& p) -> const T* {
    int32_t r = inIndex[rasterIndex(p, d)];
    return r < 0 ? nullptr : input.feats.data() + size_t(r) * input.channels;
  };
  for (size_t i = 0; i < out.coords.size(); i++)
    convolveRow(kernel, taps, out.coords[i], d, lookup, out.row(i).data());
  return out;
}

template<typename T>
std::vector<T>
sparseToDense(const SparseTensor<T>& input)
{
  input.validate();
  const int d = input.blockSize;
  std::vector<T> grid(size_t(d) * d * d * input.channels, T(0));
  for (size_t i = 0; i < input.coords.size(); i++) {
    auto row = input.row(i);
    std::copy(
      row.begin(), row.end(),
      grid.begin() + rasterIndex(input.coords[i], d) * input.channels);
  }
  return grid;
}

//============================================================================

void
NetworkConfig::validate() const
{
  if (blockSize < 1 || blockSize > 256)
    throw std::invalid_argument("network: block size out of range");
  if (mixtures < 1 || mixtures > 64)
    throw std::invalid_argument("network: mixture count out of range");
  if (filters < 1 || filters > 1024)
    throw std::invalid_argument("network: filter count out of range");
  if (kernel < 3 || kernel > 9 || kernel % 2 == 0)
    throw std::invalid_argument("network: kernel size must be odd, in [3, 9]");
  if (residualBlocks < 0 || residualBlocks > 16)
    throw std::invalid_argument("network: residual block count out of range");
}

NetworkConfig
NetworkConfig::toy()
{
  NetworkConfig cfg;
  cfg.blockSize = 8;
  cfg.mixtures = 2;
  cfg.filters = 8;
  cfg.kernel = 3;
  cfg.residualBlocks = 1;
  return cfg;
}

template<typename T>
ModelWeights<T>
ModelWeights<T>::zeros(const NetworkConfig& cfg)
{
  cfg.validate();
  ModelWeights w;
  w.config = cfg;
  const Vec3i dims{cfg.kernel, cfg.kernel, cfg.kernel};
  w.stem = MaskedKernel<T>::zeros(dims, 1, cfg.filters, MaskType::kA);
  for (int b = 0; b < cfg.residualBlocks; b++) {
    w.residual.push_back(
      {MaskedKernel<T>::zeros(dims, cfg.filters, cfg.filters, MaskType::kB),
       MaskedKernel<T>::zeros(dims, cfg.filters, cfg.filters, MaskType::kB)});
  }
  w.headWeights.assign(size_t(cfg.filters) * cfg.outputChannels(), T(0));
  w.headBias.assign(size_t(cfg.outputChannels()), T(0));
  return w;
}

template<typename T>
std::vector<std::span<T>>
ModelWeights<T>::tensors()
{
  std::vector<std::span<T>> out{stem.weights, stem.bias};
  for (auto& r : residual) {
    out.emplace_back(r.first.weights);
    out.emplace_back(r.first.bias);
    out.emplace_back(r.second.weights);
    out.emplace_back(r.second.bias);
  }
  out.emplace_back(headWeights);
  out.emplace_back(headBias);
  return out;
}

template<typename T>
std::vector<std::span<const T>>
ModelWeights<T>::tensors() const
{
  auto mut = const_cast<ModelWeights*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

template<typename T>
size_t
ModelWeights<T>::parameterCount() const
{
  size_t n = 0;
  for (auto t : tensors())
    n += t.size();
  return n;
}

template<typename T>
void
ModelWeights<T>::applyMasks()
{
  stem.applyMask();
  for (auto& r : residual) {
    r.first.applyMask();
    r.second.applyMask();
  }
}

template<typename T>
template<typename U>
ModelWeights<U>
ModelWeights<T>::cast() const
{
  auto out = ModelWeights<U>::zeros(config);
  auto src = tensors();
  auto dst = out.tensors();
  for (size_t i = 0; i < src.size(); i++)
    std::transform(src[i].begin(), src[i].end(), dst[i].begin(), [](T v) { return U(v); });
  return out;
}

ModelWeights<float>
initializeWeights(const NetworkConfig& cfg, uint64_t seed, bool randomBias)
{
  auto w = ModelWeights<float>::zeros(cfg);
  std::mt19937_64 rng(seed);
  auto uniform = [&](double bound) {
    double u = double(rng() >> 11) * 0x1.0p-53;
    return float((2 * u - 1) * bound);
  };

  auto initKernel = [&](MaskedKernel<float>& k) {
    const double fanIn =
      double(k.inChannels) * KernelTaps::make(k.dims, k.maskType).size();
    const double bound = std::sqrt(6.0 / fanIn);
    for (auto& v : k.weights)
      v = uniform(bound);
    k.applyMask();
    if (randomBias) {
      for (auto& v : k.bias)
        v = uniform(0.5);
    }
  };

  initKernel(w.stem);
  for (auto& r : w.residual) {
    initKernel(r.first);
    initKernel(r.second);
  }
  const double headBound = std::sqrt(6.0 / cfg.filters);
  for (auto& v : w.headWeights)
    v = uniform(headBound);
  if (randomBias) {
    for (auto& v : w.headBias)
      v = uniform(0.5);
  }
  return w;
}

//============================================================================

RowIndex::RowIndex(int blockSize)
  : _d(blockSize), _rows(size_t(blockSize) * blockSize * blockSize, -1)
{}

template<typename T>
std::span<const T>
ForwardPass<T>::params(int64_t raster) const
{
  int32_t r = index[raster];
  if (r < 0)
    return headBias;
  return {head.data() + size_t(r) * outputs, size_t(outputs)};
}

template<typename T>
std::span<const T>
ForwardPass<T>::params(const Vec3i& c) const
{
  return params(rasterIndex(c, blockSize));
}

template<typename T>
std::vector<T>
ForwardPass<T>::denseParams() const
{
  const int64_t n = int64_t(blockSize) * blockSize * blockSize;
  std::vector<T> grid(size_t(n) * outputs);
  for (int64_t i = 0; i < n; i++) {
    auto p = params(i);
    std::copy(p.begin(), p.end(), grid.begin() + i * outputs);
  }
  return grid;
}

template<typename T>
std::vector<uint8_t>
ForwardPass<T>::activationPattern() const
{
  std::vector<uint8_t> pattern;
  auto append = [&](const std::vector<T>& v) {
    for (T x : v)
      pattern.push_back(x > T(0));
  };
  append(stemPre);
  for (const auto& r : residual) {
    append(r.pre1);
    append(r.sum);
  }
  return pattern;
}

//============================================================================

template<typename T>
ForwardPass<T>
forward(const ModelWeights<T>& w, std::span<const Vec3i> occupied, int d)
{
  if (d < 1 || d > 256)
    throw std::invalid_argument("forward: block size out of range");

  ForwardPass<T> fp;
  fp.blockSize = d;
  fp.filters = w.config.filters;
  fp.outputs = w.config.outputChannels();
  const int f = fp.filters;
  const int o = fp.outputs;

  fp.occupied.assign(occupied.begin(), occupied.end());
  std::sort(fp.occupied.begin(), fp.occupied.end());
  fp.occupiedIndex = RowIndex(d);
  for (size_t i = 0; i < fp.occupied.size(); i++) {
    const auto& p = fp.occupied[i];
    if (!inBlock(p, d))
      throw std::invalid_argument("forward: occupied voxel outside block");
    if (i && fp.occupied[i - 1] == p)
      throw std::invalid_argument("forward: duplicate occupied voxel");
    fp.occupiedIndex[rasterIndex(p, d)] = int32_t(i);
  }

  const auto stemTaps = KernelTaps::make(w.stem.dims, w.stem.maskType);
  const auto resTaps = w.residual.empty()
    ? KernelTaps{}
    : KernelTaps::make(w.residual[0].first.dims, w.residual[0].first.maskType);

  // Coordinates generated by the first layer.
  {
    std::vector<uint8_t> mark(size_t(d) * d * d, 0);
    for (const auto& p : fp.occupied) {
      for (const auto& off : stemTaps.offsets) {
        Vec3i q = p - off;
        if (inBlock(q, d))
          mark[size_t(rasterIndex(q, d))] = 1;
      }
    }
    fp.index = RowIndex(d);
    for (int64_t r = 0; r < int64_t(mark.size()); r++) {
      if (mark[size_t(r)]) {
        fp.index[r] = int32_t(fp.coords.size());
        fp.coords.push_back(rasterCoord(r, d));
      }
    }
  }
  const size_t n = fp.coords.size();

  auto occLookup = [&](const Vec3i& p) -> const T* {
    return fp.occupiedIndex[rasterIndex(p, d)] < 0 ? nullptr : &One<T>::value;
  };
  auto rowsOf = [&](const std::vector<T>& act) {
    return [&fp, &act, d, f](const Vec3i& p) -> const T* {
      int32_t r = fp.index[rasterIndex(p, d)];
      return r < 0 ? nullptr : act.data() + size_t(r) * f;
    };
  };

  fp.stemPre.assign(n * f, T(0));
  fp.stemOut.assign(n * f, T(0));
  for (size_t i = 0; i < n; i++) {
    convolveRow(w.stem, stemTaps, fp.coords[i], d, occLookup, &fp.stemPre[i * f]);
    reluRow(&fp.stemPre[i * f], &fp.stemOut[i * f], f);
  }

  const std::vector<T>* prev = &fp.stemOut;
  fp.residual.resize(w.residual.size());
  for (size_t b = 0; b < w.residual.size(); b++) {
    auto& act = fp.residual[b];
    for (auto* v : {&act.pre1, &act.out1, &act.pre2, &act.sum, &act.out})
      v->assign(n * f, T(0));

    auto inRows = rowsOf(*prev);
    for (size_t i = 0; i < n; i++) {
      convolveRow(w.residual[b].first, resTaps, fp.coords[i], d, inRows, &act.pre1[i * f]);
      reluRow(&act.pre1[i * f], &act.out1[i * f], f);
    }
    auto midRows = rowsOf(act.out1);
    for (size_t i = 0; i < n; i++) {
      convolveRow(w.residual[b].second, resTaps, fp.coords[i], d, midRows, &act.pre2[i * f]);
      addRow(&act.pre2[i * f], &(*prev)[i * f], &act.sum[i * f], f);
      reluRow(&act.sum[i * f], &act.out[i * f], f);
    }
    prev = &act.out;
  }

  fp.head.assign(n * o, T(0));
  for (size_t i = 0; i < n; i++)
    headRow(w, &(*prev)[i * f], &fp.head[i * o]);
  fp.headBias = w.headBias;
  return fp;
}

//============================================================================

namespace {

  // Backward through one non-generative masked conv over the generated
  // coordinate set.  Returns d loss / d input activations.
  template<typename T>
  std::vector<T> convBackward(
    const MaskedKernel<T>& k,
    const KernelTaps& taps,
    const ForwardPass<T>& fp,
    const std::vector<T>& input,
    const std::vector<T>& gradOut,
    MaskedKernel<T>& gradK)
  {
    const int cin = k.inChannels;
    const int cout = k.outChannels;
    const int d = fp.blockSize;
    std::vector<T> gradIn(input.size(), T(0));
    for (size_t i = 0; i < fp.coords.size(); i++) {
      const T* go = &gradOut[i * cout];
      for (int co = 0; co < cout; co++)
        gradK.bias[co] += go[co];
      for (size_t t = 0; t < taps.size(); t++) {
        const Vec3i p = fp.coords[i] + taps.offsets[t];
        if (!inBlock(p, d))
          continue;
        const int32_t r = fp.index[rasterIndex(p, d)];
        if (r < 0)
          continue;
        const T* in = &input[size_t(r) * cin];
        const T* w = k.tap(taps.positions[t]);
        T* gw = gradK.tap(taps.positions[t]);
        T* gi = &gradIn[size_t(r) * cin];
        for (int ci = 0; ci < cin; ci++) {
          const T a = in[ci];
          T acc = T(0);
          for (int co = 0; co < cout; co++) {
            gw[ci * cout + co] += a * go[co];
            acc += w[ci * cout + co] * go[co];
          }
          gi[ci] += acc;
        }
      }
    }
    return gradIn;
  }

  template<typename T>
  void maskByPositive(std::vector<T>& grad, const std::vector<T>& pre)
  {
    for (size_t i = 0; i < grad.size(); i++) {
      if (!(pre[i] > T(0)))
        grad[i] = T(0);
    }
  }

}  // namespace

template<typename T>
ModelWeights<T>
backward(
  const ModelWeights<T>& w,
  const ForwardPass<T>& fp,
  std::span<const T> memberGrad,
  std::span<const T> biasOnlyGrad)
{
  const int f = fp.filters;
  const int o = fp.outputs;
  const int d = fp.blockSize;
  const size_t n = fp.coords.size();
  if (memberGrad.size() != n * o || biasOnlyGrad.size() != size_t(o))
    throw std::invalid_argument("backward: gradient shape mismatch");

  auto g = ModelWeights<T>::zeros(w.config);

  // Head.
  const std::vector<T>& hidden = fp.hidden();
  std::vector<T> dh(n * f, T(0));
  for (size_t i = 0; i < n; i++) {
    const T* go = &memberGrad[i * o];
    const T* h = &hidden[i * f];
    for (int co = 0; co < o; co++)
      g.headBias[co] += go[co];
    for (int ci = 0; ci < f; ci++) {
      T acc = T(0);
      for (int co = 0; co < o; co++) {
        g.headWeights[size_t(ci) * o + co] += h[ci] * go[co];
        acc += w.headWeights[size_t(ci) * o + co] * go[co];
      }
      dh[i * f + ci] = acc;
    }
  }
  for (int co = 0; co < o; co++)
    g.headBias[co] += biasOnlyGrad[co];

  // Residual blocks, last to first.
  const auto resTaps = w.residual.empty()
    ? KernelTaps{}
    : KernelTaps::make(w.residual[0].first.dims, w.residual[0].first.maskType);
  for (size_t bi = w.residual.size(); bi-- > 0;) {
    const auto& act = fp.residual[bi];
    const std::vector<T>& in = bi == 0 ? fp.stemOut : fp.residual[bi - 1].out;

    std::vector<T> dsum = dh;
    maskByPositive(dsum, act.sum);
    auto dOut1 = convBackward(
      w.residual[bi].second, resTaps, fp, act.out1, dsum, g.residual[bi].second);
    maskByPositive(dOut1, act.pre1);
    auto dIn = convBackward(
      w.residual[bi].first, resTaps, fp, in, dOut1, g.residual[bi].first);
    for (size_t i = 0; i < dIn.size(); i++)
      dIn[i] += dsum[i];
    dh = std::move(dIn);
  }

  // First layer: every occupied input carries feature 1.
  maskByPositive(dh, fp.stemPre);
  const auto stemTaps = KernelTaps::make(w.stem.dims, w.stem.maskType);
  for (size_t i = 0; i < n; i++) {
    const T* go = &dh[i * f];
    for (int co = 0; co < f; co++)
      g.stem.bias[co] += go[co];
    for (size_t t = 0; t < stemTaps.size(); t++) {
      const Vec3i p = fp.coords[i] + stemTaps.offsets[t];
      if (!inBlock(p, d) || fp.occupiedIndex[rasterIndex(p, d)] < 0)
        continue;
      T* gw = g.stem.tap(stemTaps.positions[t]);
      for (int co = 0; co < f; co++)
        gw[co] += go[co];
    }
  }
  return g;
}

template<typename T>
ModelWeights<T>
backward(const ModelWeights<T>& w, const ForwardPass<T>& fp, std::span<const T> denseGrad)
{
  const int o = fp.outputs;
  const int d = fp.blockSize;
  const int64_t nvox = int64_t(d) * d * d;
  if (denseGrad.size() != size_t(nvox) * o)
    throw std::invalid_argument("backward: dense gradient shape mismatch");

  std::vector<T> member(fp.coords.size() * o, T(0));
  std::vector<T> rest(size_t(o), T(0));
  for (int64_t v = 0; v < nvox; v++) {
    const T* g = &denseGrad[size_t(v) * o];
    int32_t r = fp.index[v];
    T* dst = r < 0 ? rest.data() : &member[size_t(r) * o];
    for (int c = 0; c < o; c++)
      dst[c] += g[c];
  }
  return backward<T>(w, fp, member, rest);
}

//============================================================================

template<typename T>
IncrementalPredictor<T>::IncrementalPredictor(const ModelWeights<T>& weights, int blockSize)
  : _w(weights)
  , _d(blockSize)
  , _stemTaps(KernelTaps::make(weights.stem.dims, weights.stem.maskType))
  , _occupied(size_t(blockSize) * blockSize * blockSize, 0)
  , _index(blockSize)
  , _out1(weights.residual.size())
  , _out(weights.residual.size())
  , _params(size_t(weights.config.outputChannels()))
  , _scratch(size_t(weights.config.filters) * 2)
{
  if (!weights.residual.empty())
    _resTaps = KernelTaps::make(weights.residual[0].first.dims, weights.residual[0].first.maskType);
}

template<typename T>
std::span<const T>
IncrementalPredictor<T>::predict(int64_t raster)
{
  const int64_t nvox = int64_t(_d) * _d * _d;
  if (raster <= _last || raster >= nvox)
    throw std::out_of_range("incremental predictor: voxels must be visited in raster order");
  _last = raster;

  const Vec3i q = rasterCoord(raster, _d);
  bool generated = false;
  for (const auto& off : _stemTaps.offsets) {
    const Vec3i p = q + off;
    if (inBlock(p, _d) && _occupied[size_t(rasterIndex(p, _d))]) {
      generated = true;
      break;
    }
  }
  if (!generated)
    return _w.headBias;

  const int f = _w.config.filters;
  const size_t row = _stem.size() / size_t(f);
  _index[raster] = int32_t(row);

  auto occLookup = [this](const Vec3i& p) -> const T* {
    return _occupied[size_t(rasterIndex(p, _d))] ? &One<T>::value : nullptr;
  };
  auto rowsOf = [this, f](const std::vector<T>& act) {
    return [this, &act, f](const Vec3i& p) -> const T* {
      int32_t r = _index[rasterIndex(p, _d)];
      return r < 0 ? nullptr : act.data() + size_t(r) * f;
    };
  };

  T* pre = _scratch.data();
  T* tmp = _scratch.data() + f;

  convolveRow(_w.stem, _stemTaps, q, _d, occLookup, pre);
  _stem.resize((row + 1) * f);
  reluRow(pre, &_stem[row * f], f);

  const std::vector<T>* prev = &_stem;
  for (size_t b = 0; b < _w.residual.size(); b++) {
    convolveRow(_w.residual[b].first, _resTaps, q, _d, rowsOf(*prev), pre);
    _out1[b].resize((row + 1) * f);
    reluRow(pre, &_out1[b][row * f], f);

    convolveRow(_w.residual[b].second, _resTaps, q, _d, rowsOf(_out1[b]), pre);
    addRow(pre, &(*prev)[row * f], tmp, f);
    _out[b].resize((row + 1) * f);
    reluRow(tmp, &_out[b][row * f], f);
    prev = &_out[b];
  }

  headRow(_w, &(*prev)[row * f], _params.data());
  return _params;
}

template<typename T>
void
IncrementalPredictor<T>::markOccupied()
{
  if (_last < 0)
    throw std::logic_error("incremental predictor: nothing predicted yet");
  _occupied[size_t(_last)] = 1;
}

//============================================================================
// Weight file

namespace {

  constexpr char kWeightMagic[4] = {'S', 'V', 'X', 'W'};
  constexpr uint32_t kWeightVersion = 1;
  constexpr size_t kWeightHeaderBytes = 4 + 4 + 5 * 4;

  template<typename V>
  void putLE(std::vector<uint8_t>& out, V v)
  {
    uint8_t buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out.insert(out.end(), buf, buf + sizeof(V));
  }

  template<typename V>
  V getLE(const uint8_t* p)
  {
    V v;
    std::memcpy(&v, p, sizeof(V));
    return v;
  }

}  // namespace

uint64_t
fnv1a64(std::span<const uint8_t> bytes)
{
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<uint8_t>
serializeWeights(const ModelWeights<float>& w)
{
  std::vector<uint8_t> out(kWeightMagic, kWeightMagic + 4);
  putLE<uint32_t>(out, kWeightVersion);
  const auto& c = w.config;
  for (int v : {c.blockSize, c.mixtures, c.filters, c.kernel, c.residualBlocks})
    putLE<uint32_t>(out, uint32_t(v));
  for (auto t : w.tensors()) {
    for (float v : t)
      putLE<float>(out, v);
  }
  putLE<uint64_t>(out, fnv1a64(out));
  return out;
}

ModelWeights<float>
parseWeights(std::span<const uint8_t> bytes)
{
  if (bytes.size() < kWeightHeaderBytes + 8)
    throw ParseError("weights: file too short");
  if (!std::equal(kWeightMagic, kWeightMagic + 4, bytes.begin()))
    throw ParseError("weights: bad magic");
  if (getLE<uint32_t>(&bytes[4]) != kWeightVersion)
    throw ParseError("weights: unsupported version");

  NetworkConfig cfg;
  int* fields[] = {&cfg.blockSize, &cfg.mixtures, &cfg.filters, &cfg.kernel, &cfg.residualBlocks};
  for (int i = 0; i < 5; i++) {
    uint32_t v = getLE<uint32_t>(&bytes[8 + 4 * i]);
    if (v > 1u << 20)
      throw ParseError("weights: implausible config record");
    *fields[i] = int(v);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("weights: ") + e.what());
  }

  auto w = ModelWeights<float>::zeros(cfg);
  const size_t expected = kWeightHeaderBytes + w.parameterCount() * 4 + 8;
  if (bytes.size() != expected)
    throw ParseError(
      "weights: expected " + std::to_string(expected) + " bytes, got "
      + std::to_string(bytes.size()));

  const uint64_t stored = getLE<uint64_t>(&bytes[expected - 8]);
  if (stored != fnv1a64(bytes.first(expected - 8)))
    throw ParseError("weights: checksum mismatch");

  size_t pos = kWeightHeaderBytes;
  for (auto t : w.tensors()) {
    for (float& v : t) {
      v = getLE<float>(&bytes[pos]);
      pos += 4;
      if (!std::isfinite(v))
        throw ParseError("weights: non-finite parameter");
    }
  }
  w.applyMasks();
  return w;
}

uint64_t
weightsChecksum(const ModelWeights<float>& w)
{
  auto bytes = serializeWeights(w);
  return getLE<uint64_t>(&bytes[bytes.size() - 8]);
}

//============================================================================
// Explicit instantiations: float drives the codec, double the gradient
// checks.

#define SVX_INSTANTIATE(T)                                                    \
  template struct SparseTensor<T>;                                            \
  template struct MaskedKernel<T>;                                            \
  template struct ModelWeights<T>;                                            \
  template struct ForwardPass<T>;                                             \
  template class IncrementalPredictor<T>;                                     \
  template SparseTensor<T> sparseConv<T>(                                     \
    const SparseTensor<T>&, const MaskedKernel<T>&, bool);                    \
  template std::vector<T> sparseToDense<T>(const SparseTensor<T>&);           \
  template ForwardPass<T> forward<T>(                                         \
    const ModelWeights<T>&, std::span<const Vec3i>, int);                     \
  template ModelWeights<T> backward<T>(                                       \
    const ModelWeights<T>&, const ForwardPass<T>&, std::span<const T>,        \
    std::span<const T>);                                                      \
  template ModelWeights<T> backward<T>(                                       \
    const ModelWeights<T>&, const ForwardPass<T>&, std::span<const T>);

SVX_INSTANTIATE(float)
SVX_INSTANTIATE(double)

#undef SVX_INSTANTIATE

template ModelWeights<double> ModelWeights<float>::cast<double>() const;
template ModelWeights<float> ModelWeights<double>::cast<float>() const;
template ModelWeights<float> ModelWeights<float>::cast<float>() const;

}  // namespace svx
