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

// Acceptance suite: one PASS/FAIL line per criterion.  Pass criterion
// numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "svx/baseline.h"
#include "svx/codec.h"
#include "svx/entropy_coder.h"
#include "svx/partition.h"
#include "svx/prob_model.h"
#include "svx/sparse_nn.h"
#include "svx/synth.h"
#include "svx/training.h"

using namespace svx;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double
secondsSince(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string
fmt(const char* f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<Vec3i>
randomOccupancy(std::mt19937_64& rng, int d, double density)
{
  std::bernoulli_distribution occ(density);
  std::vector<Vec3i> out;
  for (int64_t i = 0; i < int64_t(d) * d * d; i++)
    if (occ(rng))
      out.push_back(rasterCoord(i, d));
  if (out.empty())
    out.push_back(rasterCoord(int64_t(rng() % (d * d * d)), d));
  return out;
}

VoxelBlock
randomBlock(std::mt19937_64& rng, int d)
{
  std::uniform_real_distribution<double> density(0.01, 0.6);
  VoxelBlock b;
  b.size = d;
  b.occupied = randomOccupancy(rng, d, density(rng));
  return b;
}

const ModelWeights<float>&
toyModel()
{
  static const auto w = initializeWeights(NetworkConfig::toy(), 2024, true);
  return w;
}

//============================================================================

Outcome
losslessness()
{
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> depth(8, 10);
  std::uniform_real_distribution<double> logCount(2.0, 5.0);
  CodecParams params;
  params.blockSize = 8;

  int exact = 0;
  size_t points = 0;
  for (int i = 0; i < 100; i++) {
    const int bd = depth(rng);
    const auto target = size_t(std::lround(std::pow(10.0, logCount(rng))));
    auto pc = randomCloud(bd, target, 1000 + i);
    auto bytes = encodePointCloud(pc, toyModel(), params).serialize();
    auto back = decodePointCloud(Bitstream::parse(bytes), toyModel(), params);
    exact += back == pc;
    points += pc.size();
  }
  const double secs = secondsSince(t0);
  return {
    exact == 100 && secs < 600,
    std::to_string(exact) + "/100 clouds exact, " + std::to_string(points) + " points, "
      + fmt("%.1f s", secs) + " (limit 600 s)"};
}

Outcome
causality()
{
  std::mt19937_64 rng(2);
  const int d = 8;
  const int64_t n = int64_t(d) * d * d;
  int checks = 0, identical = 0;
  for (int b = 0; b < 50; b++) {
    std::uniform_real_distribution<double> density(0.02, 0.5);
    auto occ = randomOccupancy(rng, d, density(rng));
    auto base = forward<float>(toyModel(), occ, d);
    for (int k = 0; k < 20; k++) {
      const int64_t i = int64_t(rng() % n);
      std::vector<Vec3i> mutated;
      for (const auto& c : occ)
        if (rasterIndex(c, d) < i)
          mutated.push_back(c);
      std::bernoulli_distribution flip(density(rng));
      for (int64_t j = i; j < n; j++)
        if (flip(rng))
          mutated.push_back(rasterCoord(j, d));
      auto other = forward<float>(toyModel(), mutated, d);
      auto a = base.params(i);
      auto c = other.params(i);
      identical += std::equal(a.begin(), a.end(), c.begin(), c.end());
      checks++;
    }
  }
  return {identical == checks, std::to_string(identical) + "/" + std::to_string(checks)
                                 + " outputs bit-identical after mutating indices >= i"};
}

Outcome
maskConstruction()
{
  bool ok = true;
  std::ostringstream detail;
  for (int k : {1, 3, 5}) {
    const int n = k * k * k;
    for (auto type : {MaskType::kA, MaskType::kB}) {
      const auto mask = buildMask({k, k, k}, type);
      const int expected = n / 2 + (type == MaskType::kB ? 1 : 0);
      int count = 0;
      bool prefix = mask.size() == size_t(n);
      for (int j = 0; j < n && prefix; j++) {
        count += mask[j];
        // Independent oracle: offset precedes (or, for type B, equals) the
        // centre in raster order.
        const Vec3i o = kernelOffset(j, {k, k, k});
        const bool before = o.x < 0 || (o.x == 0 && (o.y < 0 || (o.y == 0 && o.z < 0)));
        const bool centre = o.x == 0 && o.y == 0 && o.z == 0;
        const bool want = before || (type == MaskType::kB && centre);
        prefix = prefix && bool(mask[j]) == want && bool(mask[j]) == (j < expected);
      }
      ok = ok && prefix && count == expected;
      detail << "k=" << k << (type == MaskType::kA ? " A:" : " B:") << count << " ";
    }
  }
  return {ok, detail.str() + "active positions"};
}

Outcome
gradients()
{
  NetworkConfig cfg;
  cfg.blockSize = 4;
  cfg.mixtures = 2;
  cfg.filters = 4;
  cfg.kernel = 3;
  cfg.residualBlocks = 2;
  const int d = cfg.blockSize;
  std::mt19937_64 rng(4);
  auto w = initializeWeights(cfg, 5, true).cast<double>();
  auto occ = randomOccupancy(rng, d, 0.3);

  auto loss = [&](const ModelWeights<double>& m) {
    auto grid = forward<double>(m, occ, d).denseParams();
    return nllLoss<double>(grid, cfg.mixtures, d, occ);
  };
  auto fp = forward<double>(w, occ, d);
  auto upstream = lossGradient<double>(fp.denseParams(), cfg.mixtures, d, occ);
  auto grads = backward<double>(w, fp, upstream);
  const auto pattern = fp.activationPattern();

  size_t checked = 0, kinks = 0, bad = 0;
  double worst = 0;
  auto gtensors = grads.tensors();
  for (size_t t = 0; t < gtensors.size(); t++) {
    for (size_t i = 0; i < gtensors[t].size(); i++) {
      double h = 1e-4, fd = 0;
      bool smooth = false;
      // Shrink the step until neither probe crosses a ReLU kink.
      for (int attempt = 0; attempt < 6 && !smooth; attempt++, h *= 0.25) {
        auto plus = w, minus = w;
        plus.tensors()[t][i] += h;
        minus.tensors()[t][i] -= h;
        smooth = forward<double>(plus, occ, d).activationPattern() == pattern
          && forward<double>(minus, occ, d).activationPattern() == pattern;
        if (smooth)
          fd = (loss(plus) - loss(minus)) / (2 * h);
      }
      if (!smooth) {
        kinks++;
        continue;
      }
      const double g = gtensors[t][i];
      const double err = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6});
      worst = std::max(worst, err);
      bad += err > 1e-3;
      checked++;
    }
  }
  const size_t total = w.parameterCount();
  return {
    bad == 0 && checked + kinks == total && kinks * 20 < total,
    std::to_string(checked) + "/" + std::to_string(total) + " weights checked ("
      + std::to_string(kinks) + " on a ReLU kink), worst relative error "
      + fmt("%.2e", worst) + " (limit 1e-3)"};
}

Outcome
coderOptimality()
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_real_distribution<double> logit(-12, 12);
  const int n = 100000;
  std::vector<double> ps(n);
  std::vector<int> bits(n);
  double ideal = 0;
  RangeEncoder enc;
  for (int i = 0; i < n; i++) {
    double p = i % 2 ? u(rng) : 1 / (1 + std::exp(-logit(rng)));
    p = std::clamp(p, kProbabilityFloor, 1 - kProbabilityFloor);
    ps[i] = p;
    bits[i] = u(rng) < p;
    ideal += codeLengthBits(p, bits[i]);
    enc.encode(bits[i], p);
  }
  const auto payload = enc.finish();
  RangeDecoder dec(payload);
  int mismatches = 0;
  for (int i = 0; i < n; i++)
    mismatches += dec.decode(ps[i]) != bits[i];
  bool consumed = true;
  try {
    dec.finish();
  } catch (const std::exception&) {
    consumed = false;
  }
  const double actual = payload.size() * 8.0;
  return {
    actual <= ideal + 64 && mismatches == 0 && consumed,
    fmt("payload %.0f bits, ", actual) + fmt("ideal %.1f bits, ", ideal)
      + fmt("overhead %.1f (limit 64), ", actual - ideal) + std::to_string(mismatches)
      + " decode mismatches"};
}

Outcome
codelengthIdentity()
{
  std::mt19937_64 rng(6);
  int inside = 0;
  double minSlack = 1e9, maxSlack = -1e9, maxModelGap = 0;
  for (int b = 0; b < 100; b++) {
    auto block = randomBlock(rng, 8);
    double nll = 0;
    auto payload = encodeBlock(block, toyModel(), &nll);
    const double slack = payload.size() * 8.0 - nll;
    inside += slack >= 0 && slack <= 64;
    minSlack = std::min(minSlack, slack);
    maxSlack = std::max(maxSlack, slack);
    // The training objective computes the same code length independently.
    const double objective = natsToBits(blockNll<double>(toyModel().cast<double>(), block));
    maxModelGap = std::max(maxModelGap, std::abs(objective - nll) / nll);
  }
  return {
    inside == 100 && maxModelGap < 1e-4,
    std::to_string(inside) + "/100 blocks in range, payload - NLL in ["
      + fmt("%.2f", minSlack) + fmt(", %.2f] bits", maxSlack)
      + fmt(", training objective within %.1e relative", maxModelGap)};
}

Outcome
sequentialEquivalence()
{
  std::mt19937_64 rng(7);
  int equal = 0;
  for (int b = 0; b < 50; b++) {
    auto block = randomBlock(rng, 8);
    auto one = teacherForcedProbabilities(block, toyModel());
    auto seq = sequentialProbabilities(block, toyModel(), DecodeStrategy::kFromScratch);
    auto inc = sequentialProbabilities(block, toyModel(), DecodeStrategy::kIncremental);
    bool same = one.size() == seq.size() && one.size() == inc.size();
    for (size_t i = 0; same && i < one.size(); i++)
      same = one[i].p1 == seq[i].p1 && one[i].p1 == inc[i].p1;
    equal += same;
  }
  return {equal == 50, std::to_string(equal)
                         + "/50 blocks bit-exact (from-scratch and incremental decoders)"};
}

Outcome
learningEffectiveness()
{
  const auto t0 = Clock::now();
  const auto corpus = structuredCorpus(24, 8, 6000, 11);
  const auto heldOut = structuredCorpus(10, 8, 6000, 999);
  const auto ds = makeDataset(corpus, 16, 3, 0.1);

  TrainConfig cfg;
  cfg.learningRate = 1e-3;
  cfg.batchSize = 8;
  cfg.accumulationSteps = 1;
  cfg.maxEpochs = 40;
  cfg.patience = 5;
  auto res = train(ds, initializeWeights(NetworkConfig::toy(), 17), cfg);
  const double trainSecs = secondsSince(t0);

  CodecParams params;
  params.blockSize = 64;
  uint64_t modelBits = 0, order0Bits = 0;
  size_t points = 0;
  for (const auto& pc : heldOut) {
    CodingStats stats;
    encodePointCloud(pc, res.weights, params, &stats);
    modelBits += stats.totalBits;
    order0Bits += encodeOrder0(pc, 64).totalBits();
    points += pc.size();
  }
  const double bpov = double(modelBits) / points;
  const double base = double(order0Bits) / points;
  const double gain = 1 - bpov / base;
  return {
    gain >= 0.20 && trainSecs < 1800,
    fmt("held-out %.3f bpov", bpov) + fmt(" vs order-0 %.3f", base)
      + fmt(", gain %.1f%% (limit 20%%)", 100 * gain) + ", "
      + std::to_string(res.history.size()) + " epochs" + fmt(", training %.0f s", trainSecs)};
}

Outcome
octreeOverhead()
{
  CodecParams params;
  params.blockSize = 16;
  bool ok = true;
  std::ostringstream detail;
  double worst = 0, minOcc = 1;
  for (uint64_t seed : {1, 2, 3}) {
    auto pc = synthesizeShape(ShapeKind::kSolid, 10, 100000, seed);
    CodingStats stats;
    encodePointCloud(pc, toyModel(), params, &stats);
    const int d = params.blockSize;
    const double occupancy = double(stats.points) / (double(stats.blocks) * d * d * d);
    ok = ok && occupancy >= 0.30 && stats.octreeShare() < 0.05;
    worst = std::max(worst, stats.octreeShare());
    minOcc = std::min(minOcc, occupancy);
    detail << fmt("%.2f%% ", 100 * stats.octreeShare());
  }
  return {ok, "octree share " + detail.str() + fmt("(limit 5%%), block occupancy >= %.0f%%", 100 * minOcc)};
}

Outcome
overfit()
{
  VoxelBlock cube;
  cube.size = 8;
  for (int x = 1; x < 7; x++)
    for (int y = 1; y < 7; y++)
      for (int z = 1; z < 7; z++)
        cube.occupied.push_back({x, y, z});
  BlockDataset ds;
  ds.train.assign(16, cube);

  TrainConfig cfg;
  cfg.learningRate = 1e-2;
  cfg.batchSize = 1;
  cfg.accumulationSteps = 1;
  cfg.rotate = cfg.subsample = false;
  cfg.maxEpochs = 200;
  cfg.patience = 200;
  auto res = train(ds, initializeWeights(NetworkConfig::toy(), 12), cfg);
  int reached = 0;
  for (const auto& m : res.history)
    if (!reached && m.validationBpov < 0.1)
      reached = m.epoch;
  const double best = res.history[size_t(res.bestEpoch - 1)].validationBpov;
  // The returned weights must achieve it too.
  const double check = natsToBits(blockNll<float>(res.weights, cube)) / cube.occupied.size();
  return {
    reached > 0 && check < 0.1,
    fmt("best %.4f bpov", best) + fmt(", returned weights %.4f", check) + " (limit 0.1), "
      + (reached ? "first below at epoch " + std::to_string(reached) : std::string("never below"))};
}

}  // namespace

int
main(int argc, char** argv)
{
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
    {1, "losslessness", losslessness},
    {2, "causality", causality},
    {3, "mask construction", maskConstruction},
    {4, "gradient correctness", gradients},
    {5, "coder optimality", coderOptimality},
    {6, "codelength identity", codelengthIdentity},
    {7, "one-pass/sequential equivalence", sequentialEquivalence},
    {8, "learning effectiveness", learningEffectiveness},
    {9, "octree overhead", octreeOverhead},
    {10, "overfit sanity", overfit},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; i++)
    selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id))
      continue;
    const auto t0 = Clock::now();
    Outcome r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += !r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": "
              << r.detail << fmt(" [%.1f s]", secondsSince(t0)) << std::endl;
  }
  return failed ? 1 : 0;
}
