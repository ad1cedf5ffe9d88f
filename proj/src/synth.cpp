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

#include "svx/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace svx {

namespace {

  constexpr std::array<std::pair<ShapeKind, std::string_view>, 7> kShapeNames{{
    {ShapeKind::kSphere, "sphere"},
    {ShapeKind::kBox, "box"},
    {ShapeKind::kPlane, "plane"},
    {ShapeKind::kTorus, "torus"},
    {ShapeKind::kTerrain, "terrain"},
    {ShapeKind::kSolid, "solid"},
    {ShapeKind::kUniform, "uniform"},
  }};

  using Vec3d = std::array<double, 3>;

  class Sampler {
  public:
    Sampler(int bitDepth, uint64_t seed) : _size(1 << bitDepth), _rng(seed) {}

    double uniform(double lo, double hi)
    {
      return std::uniform_real_distribution<double>(lo, hi)(_rng);
    }

    std::mt19937_64& rng() { return _rng; }
    int size() const { return _size; }

    void add(const Vec3d& p)
    {
      Vec3i v;
      for (int k = 0; k < 3; k++) {
        const double r = std::floor(p[k] + 0.5);
        if (r < 0 || r >= _size)
          return;
        v[k] = int32_t(r);
      }
      _points.push_back(v);
    }

    std::vector<Vec3i> take() { return std::move(_points); }

  private:
    int _size;
    std::mt19937_64 _rng;
    std::vector<Vec3i> _points;
  };

  // Random orthonormal frame.
  std::array<Vec3d, 3> randomFrame(Sampler& s)
  {
    const double a = s.uniform(0, 2 * std::numbers::pi);
    const double b = s.uniform(0, 2 * std::numbers::pi);
    const double c = s.uniform(-1, 1);
    const double sc = std::sqrt(1 - c * c);
    Vec3d u{sc * std::cos(a), sc * std::sin(a), c};
    Vec3d t = std::abs(u[0]) < 0.9 ? Vec3d{1, 0, 0} : Vec3d{0, 1, 0};
    auto cross = [](const Vec3d& x, const Vec3d& y) {
      return Vec3d{x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]};
    };
    Vec3d v = cross(u, t);
    double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    for (auto& x : v)
      x /= n;
    Vec3d w = cross(u, v);
    // Spin the in-plane axes.
    Vec3d v2, w2;
    for (int k = 0; k < 3; k++) {
      v2[k] = std::cos(b) * v[k] + std::sin(b) * w[k];
      w2[k] = -std::sin(b) * v[k] + std::cos(b) * w[k];
    }
    return {u, v2, w2};
  }

  Vec3d at(const Vec3d& c, const std::array<Vec3d, 3>& f, double a, double b, double n)
  {
    Vec3d p;
    for (int k = 0; k < 3; k++)
      p[k] = c[k] + a * f[1][k] + b * f[2][k] + n * f[0][k];
    return p;
  }

  Vec3d randomCentre(Sampler& s, double margin)
  {
    const double lo = std::min(margin, s.size() / 2.0);
    const double hi = std::max(s.size() - margin, s.size() / 2.0);
    return {s.uniform(lo, hi), s.uniform(lo, hi), s.uniform(lo, hi)};
  }

  void sphere(Sampler& s, size_t target)
  {
    const double r = std::clamp(std::sqrt(target / (4 * std::numbers::pi)), 2.0, s.size() * 0.45);
    const Vec3d c = randomCentre(s, r + 1);
    const int rings = int(std::ceil(std::numbers::pi * r * 2));
    for (int i = 0; i <= rings; i++) {
      const double theta = std::numbers::pi * i / rings;
      const double rr = r * std::sin(theta);
      const int segs = std::max(1, int(std::ceil(2 * std::numbers::pi * rr * 2)));
      for (int j = 0; j < segs; j++) {
        const double phi = 2 * std::numbers::pi * j / segs;
        s.add({c[0] + rr * std::cos(phi), c[1] + rr * std::sin(phi), c[2] + r * std::cos(theta)});
      }
    }
  }

  void patch(Sampler& s, const Vec3d& c, const std::array<Vec3d, 3>& f, double w, double h, double n)
  {
    for (double a = -w / 2; a <= w / 2; a += 0.5)
      for (double b = -h / 2; b <= h / 2; b += 0.5)
        s.add(at(c, f, a, b, n));
  }

  void box(Sampler& s, size_t target)
  {
    const double e = std::clamp(std::sqrt(target / 6.0), 2.0, s.size() * 0.5);
    const double ex = e * s.uniform(0.6, 1.4), ey = e * s.uniform(0.6, 1.4),
                 ez = e * s.uniform(0.6, 1.4);
    const Vec3d c = randomCentre(s, 0.9 * std::max({ex, ey, ez}));
    const auto f = randomFrame(s);
    // Faces normal to each frame axis: (normal, in-plane a, in-plane b).
    const std::array<std::array<int, 3>, 3> faces{{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}};
    const std::array<double, 3> ext{ex, ey, ez};
    for (const auto& face : faces) {
      std::array<Vec3d, 3> g{f[face[0]], f[face[1]], f[face[2]]};
      for (double sign : {-1.0, 1.0})
        patch(s, c, g, ext[face[1]], ext[face[2]], sign * ext[face[0]] / 2);
    }
  }

  void plane(Sampler& s, size_t target)
  {
    const double e = std::clamp(std::sqrt(double(target)), 2.0, s.size() * 0.9);
    const double w = e * s.uniform(0.7, 1.3), h = double(target) / w;
    patch(s, randomCentre(s, 0), randomFrame(s), w, std::min(h, s.size() * 1.2), 0);
  }

  void torus(Sampler& s, size_t target)
  {
    // Area 4 pi^2 R r with r = R / 3.
    const double big =
      std::clamp(std::sqrt(3 * target / (4 * std::numbers::pi * std::numbers::pi)), 3.0, s.size() * 0.35);
    const double small = big / 3;
    const Vec3d c = randomCentre(s, big + small + 1);
    const auto f = randomFrame(s);
    const int nu = int(std::ceil(2 * std::numbers::pi * (big + small) * 2));
    const int nv = int(std::ceil(2 * std::numbers::pi * small * 2));
    for (int i = 0; i < nu; i++) {
      const double u = 2 * std::numbers::pi * i / nu;
      for (int j = 0; j < nv; j++) {
        const double v = 2 * std::numbers::pi * j / nv;
        const double rr = big + small * std::cos(v);
        s.add(at(c, f, rr * std::cos(u), rr * std::sin(u), small * std::sin(v)));
      }
    }
  }

  void terrain(Sampler& s, size_t target)
  {
    const double e = std::clamp(std::sqrt(double(target)), 2.0, double(s.size()));
    const double x0 = s.uniform(0, s.size() - e), y0 = s.uniform(0, s.size() - e);
    const double base = s.uniform(0.3, 0.7) * s.size();
    const double amp = s.uniform(0.05, 0.15) * e;
    std::array<double, 4> fx, fy, ph;
    for (int k = 0; k < 4; k++) {
      fx[k] = s.uniform(0.5, 3.0) * (k + 1) / e;
      fy[k] = s.uniform(0.5, 3.0) * (k + 1) / e;
      ph[k] = s.uniform(0, 2 * std::numbers::pi);
    }
    auto height = [&](double x, double y) {
      double h = base;
      for (int k = 0; k < 4; k++)
        h += amp / (k + 1) * std::sin(fx[k] * x + fy[k] * y + ph[k]);
      return h;
    };
    for (double x = 0; x <= e; x += 0.5) {
      for (double y = 0; y <= e; y += 0.5) {
        const double h = height(x, y);
        // Fill vertical gaps on steep slopes.
        const double hn = std::min({height(x + 0.5, y), height(x, y + 0.5), h});
        for (double z = hn; z <= h + 1e-9; z += 0.5)
          s.add({x0 + x, y0 + y, z});
        s.add({x0 + x, y0 + y, h});
      }
    }
  }

  void solid(Sampler& s, size_t target)
  {
    const double e = std::clamp(std::cbrt(double(target)), 1.0, double(s.size()));
    const int ex = std::max(1, int(e * s.uniform(0.8, 1.2)));
    const int ey = std::max(1, int(e * s.uniform(0.8, 1.2)));
    const int ez = std::max(1, int(double(target) / (ex * ey)));
    const Vec3d c = randomCentre(s, 0);
    for (int x = 0; x < ex; x++)
      for (int y = 0; y < ey; y++)
        for (int z = 0; z < ez; z++)
          s.add({c[0] - ex / 2 + x, c[1] - ey / 2 + y, c[2] - ez / 2 + z});
  }

  void uniformPoints(Sampler& s, size_t target)
  {
    for (size_t i = 0; i < target; i++)
      s.add({s.uniform(0, s.size()) - 0.5, s.uniform(0, s.size()) - 0.5,
             s.uniform(0, s.size()) - 0.5});
  }

  // Keeps at most `limit` points, chosen uniformly.
  void capPoints(std::vector<Vec3i>& pts, size_t limit, std::mt19937_64& rng)
  {
    if (pts.size() <= limit)
      return;
    std::shuffle(pts.begin(), pts.end(), rng);
    pts.resize(limit);
  }

}  // namespace

std::string_view
shapeName(ShapeKind kind)
{
  for (const auto& [k, name] : kShapeNames)
    if (k == kind)
      return name;
  return "unknown";
}

std::optional<ShapeKind>
parseShapeKind(std::string_view name)
{
  for (const auto& [k, n] : kShapeNames)
    if (n == name)
      return k;
  return std::nullopt;
}

std::vector<ShapeKind>
allShapes()
{
  std::vector<ShapeKind> out;
  for (const auto& entry : kShapeNames)
    out.push_back(entry.first);
  return out;
}

PointCloud
synthesizeShape(ShapeKind kind, int bitDepth, size_t targetPoints, uint64_t seed)
{
  if (bitDepth < 1 || bitDepth > 16)
    throw std::invalid_argument("synth: bit depth must be in [1, 16]");
  if (targetPoints == 0)
    throw std::invalid_argument("synth: target point count must be positive");

  Sampler s(bitDepth, seed);
  switch (kind) {
  case ShapeKind::kSphere: sphere(s, targetPoints); break;
  case ShapeKind::kBox: box(s, targetPoints); break;
  case ShapeKind::kPlane: plane(s, targetPoints); break;
  case ShapeKind::kTorus: torus(s, targetPoints); break;
  case ShapeKind::kTerrain: terrain(s, targetPoints); break;
  case ShapeKind::kSolid: solid(s, targetPoints); break;
  case ShapeKind::kUniform: uniformPoints(s, targetPoints); break;
  }

  auto pts = s.take();
  if (pts.empty()) {
    const int32_t mid = int32_t(s.size() / 2);
    pts.push_back({mid, mid, mid});
  }
  return PointCloud::fromPoints(std::move(pts), bitDepth);
}

PointCloud
randomCloud(int bitDepth, size_t targetPoints, uint64_t seed)
{
  std::mt19937_64 rng(seed);
  const auto shapes = allShapes();
  const auto kind = shapes[rng() % shapes.size()];
  auto pc = synthesizeShape(kind, bitDepth, targetPoints, rng());
  capPoints(pc.points, targetPoints, rng);
  std::sort(pc.points.begin(), pc.points.end());
  return pc;
}

std::vector<PointCloud>
structuredCorpus(size_t count, int bitDepth, size_t targetPoints, uint64_t seed)
{
  static constexpr ShapeKind kStructured[] = {
    ShapeKind::kSphere, ShapeKind::kBox, ShapeKind::kPlane, ShapeKind::kTorus,
    ShapeKind::kTerrain};
  std::mt19937_64 rng(seed);
  std::vector<PointCloud> out;
  for (size_t i = 0; i < count; i++) {
    const auto kind = kStructured[i % std::size(kStructured)];
    std::uniform_real_distribution<double> scale(0.5, 1.5);
    const auto n = std::max<size_t>(16, size_t(double(targetPoints) * scale(rng)));
    out.push_back(synthesizeShape(kind, bitDepth, n, rng()));
  }
  return out;
}

}  // namespace svx
