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

#include "svx/codec.h"

#include <cstring>
#include <stdexcept>
#include <string>

#include "svx/entropy_coder.h"
#include "svx/errors.h"
#include "svx/parallel.h"

namespace svx {

//============================================================================
// Container

namespace {

  constexpr char kMagic[4] = {'S', 'V', 'X', 'B'};

  template<typename V>
  void put(std::vector<uint8_t>& out, V v)
  {
    uint8_t buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out.insert(out.end(), buf, buf + sizeof(V));
  }

  class Reader {
  public:
    explicit Reader(std::span<const uint8_t> in) : _in(in) {}

    template<typename V>
    V get(const char* what)
    {
      auto bytes = take(sizeof(V), what);
      V v;
      std::memcpy(&v, bytes.data(), sizeof(V));
      return v;
    }

    std::span<const uint8_t> take(size_t n, const char* what)
    {
      if (_in.size() - _pos < n)
        throw CorruptBitstream(std::string("bitstream: truncated ") + what);
      auto s = _in.subspan(_pos, n);
      _pos += n;
      return s;
    }

    size_t remaining() const { return _in.size() - _pos; }

  private:
    std::span<const uint8_t> _in;
    size_t _pos = 0;
  };

}  // namespace

std::vector<uint8_t>
Bitstream::serialize() const
{
  std::vector<uint8_t> out(kMagic, kMagic + 4);
  out.reserve(sizeBytes());
  put<uint8_t>(out, kVersion);
  put<uint8_t>(out, uint8_t(bitDepth));
  put<uint8_t>(out, uint8_t(blockSizeLog2));
  put<uint8_t>(out, uint8_t(kernel));
  put<uint16_t>(out, uint16_t(mixtures));
  put<uint16_t>(out, uint16_t(filters));
  put<uint8_t>(out, uint8_t(residualBlocks));
  put<uint64_t>(out, modelChecksum);
  put<uint32_t>(out, uint32_t(octree.size()));
  out.insert(out.end(), octree.begin(), octree.end());
  put<uint32_t>(out, uint32_t(payloads.size()));
  for (const auto& p : payloads) {
    put<uint32_t>(out, uint32_t(p.size()));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

size_t
Bitstream::sizeBytes() const
{
  size_t n = kHeaderBytes + 4 + octree.size() + 4;
  for (const auto& p : payloads)
    n += 4 + p.size();
  return n;
}

Bitstream
Bitstream::parse(std::span<const uint8_t> bytes)
{
  Reader rd(bytes);
  auto magic = rd.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic))
    throw CorruptBitstream("bitstream: bad magic");
  if (rd.get<uint8_t>("header") != kVersion)
    throw CorruptBitstream("bitstream: unsupported version");

  Bitstream bs;
  bs.bitDepth = rd.get<uint8_t>("header");
  bs.blockSizeLog2 = rd.get<uint8_t>("header");
  bs.kernel = rd.get<uint8_t>("header");
  bs.mixtures = rd.get<uint16_t>("header");
  bs.filters = rd.get<uint16_t>("header");
  bs.residualBlocks = rd.get<uint8_t>("header");
  bs.modelChecksum = rd.get<uint64_t>("header");
  if (bs.bitDepth < 1 || bs.bitDepth > 16)
    throw CorruptBitstream("bitstream: invalid bit depth");
  if (bs.blockSizeLog2 < 1 || bs.blockSizeLog2 > 7)
    throw CorruptBitstream("bitstream: invalid block size");

  auto octreeLen = rd.get<uint32_t>("octree length");
  auto octree = rd.take(octreeLen, "octree");
  bs.octree.assign(octree.begin(), octree.end());

  auto blocks = rd.get<uint32_t>("block count");
  // Every block needs at least a length field and a 4-byte payload.
  if (uint64_t(blocks) * 8 > rd.remaining())
    throw CorruptBitstream("bitstream: truncated block list");
  bs.payloads.reserve(blocks);
  for (uint32_t b = 0; b < blocks; b++) {
    auto len = rd.get<uint32_t>("payload length");
    auto payload = rd.take(len, "payload");
    bs.payloads.emplace_back(payload.begin(), payload.end());
  }
  if (rd.remaining())
    throw CorruptBitstream("bitstream: trailing bytes");
  return bs;
}

//============================================================================
// Block coding

namespace {

  void checkBlock(const VoxelBlock& block)
  {
    if (block.size < 1 || block.size > 256)
      throw std::invalid_argument("block: size out of range");
    if (block.occupied.empty())
      throw std::invalid_argument("block: empty blocks are never coded");
  }

  std::vector<uint8_t> labels(const VoxelBlock& block)
  {
    std::vector<uint8_t> lab(size_t(block.size) * block.size * block.size, 0);
    for (const auto& c : block.occupied)
      lab[size_t(checkedRasterIndex(c, block.size))] = 1;
    return lab;
  }

  // Probability of a voxel given its raw parameters, memoising the shared
  // parameters of voxels without generated features.
  class ProbabilityCache {
  public:
    ProbabilityCache(std::span<const float> biasParams, int mixtures)
      : _bias(biasParams.data()), _mixtures(mixtures),
        _biasProb(occupancyProbability(biasParams, mixtures))
    {}

    BitProbability operator()(std::span<const float> raw) const
    {
      return raw.data() == _bias ? _biasProb : occupancyProbability(raw, _mixtures);
    }

  private:
    const float* _bias;
    int _mixtures;
    BitProbability _biasProb;
  };

}  // namespace

std::vector<BitProbability>
teacherForcedProbabilities(const VoxelBlock& block, const ModelWeights<float>& weights)
{
  const int d = block.size;
  auto fp = forward<float>(weights, block.occupied, d);
  ProbabilityCache prob(fp.headBias, weights.config.mixtures);
  const int64_t n = int64_t(d) * d * d;
  std::vector<BitProbability> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; i++)
    out[size_t(i)] = prob(fp.params(i));
  return out;
}

std::vector<BitProbability>
sequentialProbabilities(
  const VoxelBlock& block, const ModelWeights<float>& weights, DecodeStrategy strategy)
{
  const int d = block.size;
  const auto lab = labels(block);
  const int64_t n = int64_t(d) * d * d;
  const int L = weights.config.mixtures;
  std::vector<BitProbability> out(static_cast<size_t>(n));

  if (strategy == DecodeStrategy::kIncremental) {
    IncrementalPredictor<float> pred(weights, d);
    ProbabilityCache prob(weights.headBias, L);
    for (int64_t i = 0; i < n; i++) {
      out[size_t(i)] = prob(pred.predict(i));
      if (lab[size_t(i)])
        pred.markOccupied();
    }
  } else {
    std::vector<Vec3i> known;
    for (int64_t i = 0; i < n; i++) {
      auto fp = forward<float>(weights, known, d);
      out[size_t(i)] = occupancyProbability(fp.params(i), L);
      if (lab[size_t(i)])
        known.push_back(rasterCoord(i, d));
    }
  }
  return out;
}

std::vector<uint8_t>
encodeBlock(const VoxelBlock& block, const ModelWeights<float>& weights, double* nllBits)
{
  checkBlock(block);
  const int d = block.size;
  const auto lab = labels(block);
  auto fp = forward<float>(weights, block.occupied, d);
  ProbabilityCache prob(fp.headBias, weights.config.mixtures);

  RangeEncoder enc;
  double nll = 0;
  for (int64_t i = 0; i < int64_t(lab.size()); i++) {
    const BitProbability p = prob(fp.params(i));
    const int bit = lab[size_t(i)];
    enc.encode(bit, p.p1);
    nll += codeLengthBits(p.p1, bit);
  }
  if (nllBits)
    *nllBits = nll;
  return enc.finish();
}

VoxelBlock
decodeBlock(
  std::span<const uint8_t> payload,
  const ModelWeights<float>& weights,
  int d,
  const Vec3i& origin,
  DecodeStrategy strategy)
{
  if (d < 1 || d > 256)
    throw std::invalid_argument("block: size out of range");

  VoxelBlock block;
  block.origin = origin;
  block.size = d;
  const int64_t n = int64_t(d) * d * d;
  const int L = weights.config.mixtures;

  RangeDecoder dec(payload);
  if (strategy == DecodeStrategy::kIncremental) {
    IncrementalPredictor<float> pred(weights, d);
    ProbabilityCache prob(weights.headBias, L);
    for (int64_t i = 0; i < n; i++) {
      const BitProbability p = prob(pred.predict(i));
      if (dec.decode(p.p1)) {
        pred.markOccupied();
        block.occupied.push_back(rasterCoord(i, d));
      }
    }
  } else {
    for (int64_t i = 0; i < n; i++) {
      auto fp = forward<float>(weights, block.occupied, d);
      const BitProbability p = occupancyProbability(fp.params(i), L);
      if (dec.decode(p.p1))
        block.occupied.push_back(rasterCoord(i, d));
    }
  }
  dec.finish();
  if (block.occupied.empty())
    throw CorruptBitstream("block payload decodes to an empty block");
  return block;
}

//============================================================================
// Point clouds

void
checkModel(const Bitstream& bs, const ModelWeights<float>& weights)
{
  const auto& c = weights.config;
  if (bs.kernel != c.kernel || bs.mixtures != c.mixtures || bs.filters != c.filters
      || bs.residualBlocks != c.residualBlocks)
    throw ModelMismatch("bitstream was encoded with a different network configuration");
  if (bs.modelChecksum != weightsChecksum(weights))
    throw ModelMismatch("bitstream was encoded with different weights (checksum mismatch)");
}

Bitstream
encodePointCloud(
  const PointCloud& pc,
  const ModelWeights<float>& weights,
  const CodecParams& params,
  CodingStats* stats)
{
  auto part = buildPartition(pc, params.blockSize);

  Bitstream bs;
  bs.bitDepth = pc.bitDepth;
  bs.blockSizeLog2 = part.partition.blockSizeLog2;
  if (bs.blockSizeLog2 < 1 || bs.blockSizeLog2 > 7)
    throw std::invalid_argument("codec: block size must be in [2, 128]");
  bs.kernel = weights.config.kernel;
  bs.mixtures = weights.config.mixtures;
  bs.filters = weights.config.filters;
  bs.residualBlocks = weights.config.residualBlocks;
  bs.modelChecksum = weightsChecksum(weights);
  bs.octree = serializePartition(part.partition);

  bs.payloads.resize(part.blocks.size());
  std::vector<double> nll(part.blocks.size());
  parallelFor(part.blocks.size(), params.threads, [&](size_t i) {
    bs.payloads[i] = encodeBlock(part.blocks[i], weights, &nll[i]);
  });

  if (stats) {
    *stats = {};
    stats->points = pc.size();
    stats->blocks = part.blocks.size();
    stats->totalBits = uint64_t(bs.sizeBytes()) * 8;
    stats->octreeBits = uint64_t(bs.octree.size()) * 8;
    for (size_t i = 0; i < bs.payloads.size(); i++) {
      stats->payloadBits += uint64_t(bs.payloads[i].size()) * 8;
      stats->modelNllBits += nll[i];
    }
    stats->containerBits = stats->totalBits - stats->octreeBits - stats->payloadBits;
  }
  return bs;
}

PointCloud
decodePointCloud(const Bitstream& bs, const ModelWeights<float>& weights, const CodecParams& params)
{
  checkModel(bs, weights);

  const int d = 1 << bs.blockSizeLog2;
  auto part = deserializePartition(bs.octree, bs.bitDepth, d);
  auto origins = leafOrigins(part);
  if (origins.size() != bs.payloads.size())
    throw CorruptBitstream(
      "bitstream: " + std::to_string(bs.payloads.size()) + " payloads for "
      + std::to_string(origins.size()) + " octree leaves");

  std::vector<VoxelBlock> blocks(origins.size());
  parallelFor(blocks.size(), params.threads, [&](size_t i) {
    blocks[i] = decodeBlock(bs.payloads[i], weights, d, origins[i], params.strategy);
  });

  const int32_t limit = int32_t(1) << bs.bitDepth;
  for (const auto& b : blocks) {
    for (const auto& c : b.occupied) {
      const Vec3i p = b.origin + c;
      if (p.x >= limit || p.y >= limit || p.z >= limit)
        throw CorruptBitstream("bitstream: decoded point outside the declared bit depth");
    }
  }
  return assembleBlocks(blocks, bs.bitDepth);
}

}  // namespace svx
