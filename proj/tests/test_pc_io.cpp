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

#include <cstring>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "svx/errors.h"
#include "svx/pc_io.h"
#include "test_util.h"

using namespace svx;
using svx::test::bytesOf;

namespace {

std::string
asciiPly(const std::vector<std::string>& rows, const std::string& type = "float")
{
  std::string s = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(rows.size())
    + "\nproperty " + type + " x\nproperty " + type + " y\nproperty " + type
    + " z\nend_header\n";
  for (const auto& r : rows)
    s += r + "\n";
  return s;
}

}  // namespace

TEST_CASE("raster index examples")
{
  CHECK(rasterIndex({0, 0, 0}, 64) == 0);
  CHECK(rasterIndex({1, 2, 3}, 4) == 27);
  CHECK(rasterIndex({63, 63, 63}, 64) == 262143);
  CHECK(rasterCoord(0, 64) == Vec3i{0, 0, 0});
  CHECK(rasterCoord(27, 4) == Vec3i{1, 2, 3});
  CHECK(rasterCoord(4096, 64) == Vec3i{1, 0, 0});
}

TEST_CASE("raster index is a bijection with z fastest")
{
  for (int d = 1; d <= 8; d++) {
    int64_t expect = 0;
    for (int x = 0; x < d; x++) {
      for (int y = 0; y < d; y++) {
        for (int z = 0; z < d; z++) {
          CHECK(checkedRasterIndex({x, y, z}, d) == expect);
          CHECK(checkedRasterCoord(expect, d) == Vec3i{x, y, z});
          expect++;
        }
      }
    }
  }
}

TEST_CASE("raster index rejects out-of-range input")
{
  CHECK_THROWS_AS(checkedRasterIndex({4, 0, 0}, 4), std::out_of_range);
  CHECK_THROWS_AS(checkedRasterIndex({0, -1, 0}, 4), std::out_of_range);
  CHECK_THROWS_AS(checkedRasterCoord(64, 4), std::out_of_range);
  CHECK_THROWS_AS(checkedRasterCoord(-1, 4), std::out_of_range);
}

TEST_CASE("parse ascii ply")
{
  SUBCASE("single point")
  {
    auto pc = parsePly(bytesOf(asciiPly({"0 0 0"})));
    CHECK(pc.points == std::vector<Vec3i>{{0, 0, 0}});
    CHECK(pc.bitDepth == 1);
  }
  SUBCASE("duplicates collapse")
  {
    auto pc = parsePly(bytesOf(asciiPly({"0 0 0", "0 0 0"})));
    CHECK(pc.size() == 1);
  }
  SUBCASE("bit depth inferred from the largest coordinate")
  {
    auto pc = parsePly(bytesOf(asciiPly({"1023 0 0", "0 1 2"})));
    CHECK(pc.size() == 2);
    CHECK(pc.bitDepth == 10);
  }
  SUBCASE("rounding is half-up")
  {
    auto pc = parsePly(bytesOf(asciiPly({"0.5 1.49 2.5"})));
    CHECK(pc.points == std::vector<Vec3i>{{1, 1, 3}});
  }
  SUBCASE("small negative values that round to zero are accepted")
  {
    auto pc = parsePly(bytesOf(asciiPly({"-0.4 0 0"})));
    CHECK(pc.points == std::vector<Vec3i>{{0, 0, 0}});
  }
  SUBCASE("extra properties and elements are ignored")
  {
    std::string s =
      "ply\nformat ascii 1.0\ncomment made by hand\n"
      "element camera 1\nproperty float fov\n"
      "element vertex 2\nproperty uchar red\nproperty double x\nproperty double y\n"
      "property double z\nproperty float nx\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "1.5\n"
      "255 3 4 5 0.1\n"
      "0 7 8 9 0.2\n"
      "3 0 1 1\n";
    auto pc = parsePly(bytesOf(s));
    CHECK(pc.points == std::vector<Vec3i>{{3, 4, 5}, {7, 8, 9}});
  }
  SUBCASE("integer properties")
  {
    auto pc = parsePly(bytesOf(asciiPly({"3 2 1"}, "int")));
    CHECK(pc.points == std::vector<Vec3i>{{3, 2, 1}});
  }
}

TEST_CASE("parse errors name the offending location")
{
  auto message = [](const std::string& s) {
    try {
      parsePly(bytesOf(s));
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };

  CHECK(message("plx\n").find("line 1") != std::string::npos);
  CHECK(message(asciiPly({"-1 0 0"})).find("line 8") != std::string::npos);
  CHECK(message(asciiPly({"0 0"})).find("line 8") != std::string::npos);
  CHECK(message(asciiPly({"0 0 abc"})).find("line 8") != std::string::npos);

  CHECK_THROWS_AS(parsePly(bytesOf("ply\nformat binary_big_endian 1.0\nend_header\n")), ParseError);
  CHECK_THROWS_AS(
    parsePly(bytesOf("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n")),
    ParseError);
  CHECK_THROWS_AS(parsePly(bytesOf("ply\nformat ascii 1.0\nelement vertex 1\n")), ParseError);
  CHECK_THROWS_AS(parsePly(bytesOf(asciiPly({"nan 0 0"}))), ParseError);
  CHECK_THROWS_AS(parsePly(bytesOf(asciiPly({"70000 0 0"}))), ParseError);
}

TEST_CASE("binary little-endian ply")
{
  std::string header =
    "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
    "property float x\nproperty float y\nproperty float z\nproperty uchar flag\nend_header\n";
  std::vector<uint8_t> bytes = bytesOf(header);
  auto pushFloat = [&](float f) {
    uint8_t b[4];
    std::memcpy(b, &f, 4);
    bytes.insert(bytes.end(), b, b + 4);
  };
  for (float f : {1.f, 2.f, 3.f})
    pushFloat(f);
  bytes.push_back(7);
  for (float f : {4.4f, 5.6f, 0.f})
    pushFloat(f);
  bytes.push_back(9);

  auto pc = parsePly(bytes);
  CHECK(pc.points == std::vector<Vec3i>{{1, 2, 3}, {4, 6, 0}});

  bytes.pop_back();
  try {
    parsePly(bytes);
    FAIL("truncated body accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
}

TEST_CASE("write then parse is the identity")
{
  SUBCASE("empty cloud")
  {
    PointCloud pc;
    pc.bitDepth = 8;
    auto bytes = writePly(pc);
    std::string text(bytes.begin(), bytes.end());
    CHECK(text.find("element vertex 0") != std::string::npos);
    CHECK(parsePly(bytes) == pc);
  }
  SUBCASE("single point")
  {
    auto pc = PointCloud::fromPoints({{0, 0, 0}});
    CHECK(parsePly(writePly(pc)) == pc);
  }
  SUBCASE("random clouds, both encodings, declared depth preserved")
  {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; trial++) {
      int depth = 8 + trial % 3;
      auto pc = PointCloud::fromPoints(test::randomPoints(rng, depth, 1000), 12);
      for (auto fmt : {PlyFormat::kAscii, PlyFormat::kBinaryLittleEndian}) {
        auto bytes = writePly(pc, fmt);
        CHECK(parsePly(bytes) == pc);
        CHECK(writePly(parsePly(bytes), fmt) == bytes);
      }
    }
  }
}

TEST_CASE("point cloud construction")
{
  auto pc = PointCloud::fromPoints({{3, 0, 0}, {0, 0, 1}, {3, 0, 0}});
  CHECK(pc.points == std::vector<Vec3i>{{0, 0, 1}, {3, 0, 0}});
  CHECK(pc.bitDepth == 2);
  CHECK(inferBitDepth(pc.points) == 2);
  CHECK(withBitDepth(pc, 10).bitDepth == 10);
  CHECK_THROWS_AS(withBitDepth(pc, 1), std::invalid_argument);
  CHECK_THROWS_AS(withBitDepth(pc, 17), std::invalid_argument);
  CHECK_THROWS_AS(PointCloud::fromPoints({{-1, 0, 0}}), std::invalid_argument);
}

TEST_CASE("file helpers report I/O errors")
{
  CHECK_THROWS_AS(readFile("/nonexistent/dir/file.ply"), IoError);
  std::vector<uint8_t> data{1, 2, 3};
  CHECK_THROWS_AS(writeFile("/nonexistent/dir/file.ply", data), IoError);
}
