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

#include "svx/pc_io.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "svx/errors.h"

namespace svx {

//============================================================================

int
inferBitDepth(std::span<const Vec3i> pts)
{
  int32_t maxCoord = 0;
  for (const auto& p : pts)
    maxCoord = std::max({maxCoord, p.x, p.y, p.z});
  int b = 1;
  while (b < 31 && (int64_t(1) << b) <= maxCoord)
    b++;
  return b;
}

PointCloud
PointCloud::fromPoints(std::vector<Vec3i> pts, int bitDepth)
{
  for (const auto& p : pts) {
    if (p.x < 0 || p.y < 0 || p.z < 0)
      throw std::invalid_argument("point cloud: negative coordinate");
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  int inferred = inferBitDepth(pts);
  if (inferred > 16)
    throw std::invalid_argument("point cloud: coordinates exceed 16 bits");

  PointCloud pc;
  pc.points = std::move(pts);
  pc.bitDepth = inferred;
  if (bitDepth != 0)
    return withBitDepth(std::move(pc), bitDepth);
  return pc;
}

PointCloud
withBitDepth(PointCloud pc, int bitDepth)
{
  if (bitDepth < 1 || bitDepth > 16)
    throw std::invalid_argument("point cloud: bit depth must be in [1, 16]");
  if (inferBitDepth(pc.points) > bitDepth)
    throw std::invalid_argument(
      "point cloud: points lie outside the declared bit depth "
      + std::to_string(bitDepth));
  pc.bitDepth = bitDepth;
  return pc;
}

int64_t
checkedRasterIndex(const Vec3i& c, int d)
{
  if (d <= 0)
    throw std::out_of_range("raster index: block size must be positive");
  for (int k = 0; k < 3; k++) {
    if (c[k] < 0 || c[k] >= d)
      throw std::out_of_range("raster index: coordinate outside block");
  }
  return rasterIndex(c, d);
}

Vec3i
checkedRasterCoord(int64_t i, int d)
{
  if (d <= 0)
    throw std::out_of_range("raster coord: block size must be positive");
  if (i < 0 || i >= int64_t(d) * d * d)
    throw std::out_of_range("raster coord: index outside block");
  return rasterCoord(i, d);
}

//============================================================================
// PLY reader

namespace {

  enum class PropType
  {
    kInt8,
    kUInt8,
    kInt16,
    kUInt16,
    kInt32,
    kUInt32,
    kFloat32,
    kFloat64,
  };

  std::optional<PropType> propTypeFromName(std::string_view name)
  {
    if (name == "char" || name == "int8")
      return PropType::kInt8;
    if (name == "uchar" || name == "uint8")
      return PropType::kUInt8;
    if (name == "short" || name == "int16")
      return PropType::kInt16;
    if (name == "ushort" || name == "uint16")
      return PropType::kUInt16;
    if (name == "int" || name == "int32")
      return PropType::kInt32;
    if (name == "uint" || name == "uint32")
      return PropType::kUInt32;
    if (name == "float" || name == "float32")
      return PropType::kFloat32;
    if (name == "double" || name == "float64")
      return PropType::kFloat64;
    return std::nullopt;
  }

  size_t propSize(PropType t)
  {
    switch (t) {
    case PropType::kInt8:
    case PropType::kUInt8: return 1;
    case PropType::kInt16:
    case PropType::kUInt16: return 2;
    case PropType::kInt32:
    case PropType::kUInt32:
    case PropType::kFloat32: return 4;
    case PropType::kFloat64: return 8;
    }
    return 0;
  }

  double readLittleEndian(const uint8_t* p, PropType t)
  {
    uint8_t buf[8];
    std::memcpy(buf, p, propSize(t));
    // Host is assumed little-endian (checked at build time in CMake).
    switch (t) {
    case PropType::kInt8: return double(int8_t(buf[0]));
    case PropType::kUInt8: return double(buf[0]);
    case PropType::kInt16: {
      int16_t v;
      std::memcpy(&v, buf, 2);
      return v;
    }
    case PropType::kUInt16: {
      uint16_t v;
      std::memcpy(&v, buf, 2);
      return v;
    }
    case PropType::kInt32: {
      int32_t v;
      std::memcpy(&v, buf, 4);
      return v;
    }
    case PropType::kUInt32: {
      uint32_t v;
      std::memcpy(&v, buf, 4);
      return v;
    }
    case PropType::kFloat32: {
      float v;
      std::memcpy(&v, buf, 4);
      return v;
    }
    case PropType::kFloat64: {
      double v;
      std::memcpy(&v, buf, 8);
      return v;
    }
    }
    return 0;
  }

  struct Property {
    std::string name;
    PropType type;
    bool isList = false;
    PropType countType = PropType::kUInt8;
  };

  struct Element {
    std::string name;
    size_t count = 0;
    std::vector<Property> props;
  };

  struct Header {
    bool ascii = true;
    std::vector<Element> elements;
    std::optional<int> bitDepth;
    size_t bodyOffset = 0;
    size_t bodyLine = 0;
  };

  [[noreturn]] void failLine(size_t line, const std::string& what)
  {
    throw ParseError("ply: line " + std::to_string(line) + ": " + what);
  }

  [[noreturn]] void failOffset(size_t offset, const std::string& what)
  {
    throw ParseError(
      "ply: byte offset " + std::to_string(offset) + ": " + what);
  }

  std::vector<std::string_view> splitWords(std::string_view s)
  {
    std::vector<std::string_view> words;
    size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
        i++;
      size_t j = i;
      while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])))
        j++;
      if (j > i)
        words.push_back(s.substr(i, j - i));
      i = j;
    }
    return words;
  }

  template<typename Num>
  bool parseNumber(std::string_view s, Num& out)
  {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
  }

  Header parseHeader(std::span<const uint8_t> bytes)
  {
    Header hdr;
    std::string_view text(
      reinterpret_cast<const char*>(bytes.data()), bytes.size());

    size_t pos = 0;
    size_t line = 0;
    bool sawFormat = false;
    bool sawEnd = false;
    while (pos < text.size()) {
      size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos)
        failLine(line + 1, "header not terminated by end_header");
      std::string_view ln = text.substr(pos, eol - pos);
      if (!ln.empty() && ln.back() == '\r')
        ln.remove_suffix(1);
      pos = eol + 1;
      line++;

      auto words = splitWords(ln);
      if (line == 1) {
        if (words.size() != 1 || words[0] != "ply")
          failLine(line, "missing 'ply' magic");
        continue;
      }
      if (words.empty())
        continue;

      const auto& kw = words[0];
      if (kw == "format") {
        if (words.size() != 3)
          failLine(line, "malformed format line");
        if (words[1] == "ascii")
          hdr.ascii = true;
        else if (words[1] == "binary_little_endian")
          hdr.ascii = false;
        else
          failLine(line, "unsupported format '" + std::string(words[1]) + "'");
        if (words[2] != "1.0")
          failLine(line, "unsupported version '" + std::string(words[2]) + "'");
        sawFormat = true;
      } else if (kw == "comment" || kw == "obj_info") {
        if (words.size() == 3 && words[1] == "bit_depth") {
          int b = 0;
          if (!parseNumber(words[2], b) || b < 1 || b > 16)
            failLine(line, "invalid bit_depth comment");
          hdr.bitDepth = b;
        }
      } else if (kw == "element") {
        size_t count = 0;
        if (words.size() != 3 || !parseNumber(words[2], count))
          failLine(line, "malformed element line");
        hdr.elements.push_back({std::string(words[1]), count, {}});
      } else if (kw == "property") {
        if (hdr.elements.empty())
          failLine(line, "property before any element");
        Property prop;
        if (words.size() == 5 && words[1] == "list") {
          auto ct = propTypeFromName(words[2]);
          auto it = propTypeFromName(words[3]);
          if (!ct || !it)
            failLine(line, "unknown property type");
          prop.isList = true;
          prop.countType = *ct;
          prop.type = *it;
          prop.name = words[4];
        } else if (words.size() == 3) {
          auto t = propTypeFromName(words[1]);
          if (!t)
            failLine(line, "unknown property type '" + std::string(words[1]) + "'");
          prop.type = *t;
          prop.name = words[2];
        } else {
          failLine(line, "malformed property line");
        }
        hdr.elements.back().props.push_back(prop);
      } else if (kw == "end_header") {
        sawEnd = true;
        break;
      } else {
        failLine(line, "unknown header keyword '" + std::string(kw) + "'");
      }
    }
    if (!sawEnd)
      failLine(line, "header not terminated by end_header");
    if (!sawFormat)
      failLine(line, "missing format line");
    hdr.bodyOffset = pos;
    hdr.bodyLine = line;
    return hdr;
  }

  struct VertexLayout {
    size_t elementIndex;
    int prop[3];
  };

  VertexLayout locateVertex(const Header& hdr)
  {
    for (size_t e = 0; e < hdr.elements.size(); e++) {
      const auto& el = hdr.elements[e];
      if (el.name != "vertex")
        continue;
      VertexLayout layout{e, {-1, -1, -1}};
      for (size_t p = 0; p < el.props.size(); p++) {
        const auto& prop = el.props[p];
        int axis = prop.name == "x" ? 0 : prop.name == "y" ? 1 : prop.name == "z" ? 2 : -1;
        if (prop.isList) {
          if (axis >= 0)
            throw ParseError("ply: vertex coordinate '" + prop.name + "' is a list");
          throw ParseError("ply: list properties on vertex are not supported");
        }
        if (axis >= 0)
          layout.prop[axis] = int(p);
      }
      for (int k = 0; k < 3; k++) {
        if (layout.prop[k] < 0)
          throw ParseError("ply: vertex element lacks x, y or z property");
      }
      return layout;
    }
    throw ParseError("ply: no vertex element");
  }

  Vec3i quantize(const double v[3], auto&& fail)
  {
    Vec3i q;
    for (int k = 0; k < 3; k++) {
      if (!std::isfinite(v[k]))
        fail("non-finite coordinate");
      double r = std::floor(v[k] + 0.5);
      if (r < 0)
        fail("negative coordinate after rounding");
      if (r >= 65536.0)
        fail("coordinate exceeds 16-bit range");
      q[k] = int32_t(r);
    }
    return q;
  }

  std::vector<Vec3i>
  readAsciiBody(std::span<const uint8_t> bytes, const Header& hdr, const VertexLayout& vl)
  {
    std::string_view text(
      reinterpret_cast<const char*>(bytes.data()), bytes.size());
    size_t pos = hdr.bodyOffset;
    size_t line = hdr.bodyLine;

    auto nextLine = [&]() -> std::string_view {
      while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
          eol = text.size();
        std::string_view ln = text.substr(pos, eol - pos);
        pos = eol + 1;
        line++;
        if (!splitWords(ln).empty())
          return ln;
      }
      failLine(line + 1, "unexpected end of file");
    };

    std::vector<Vec3i> pts;
    for (size_t e = 0; e <= vl.elementIndex; e++) {
      const auto& el = hdr.elements[e];
      if (e < vl.elementIndex) {
        for (size_t i = 0; i < el.count; i++)
          nextLine();
        continue;
      }
      pts.reserve(el.count);
      for (size_t i = 0; i < el.count; i++) {
        auto words = splitWords(nextLine());
        if (words.size() < el.props.size())
          failLine(line, "expected " + std::to_string(el.props.size()) + " values");
        double v[3];
        for (int k = 0; k < 3; k++) {
          if (!parseNumber(words[vl.prop[k]], v[k]))
            failLine(line, "invalid number '" + std::string(words[vl.prop[k]]) + "'");
        }
        pts.push_back(quantize(v, [&](const std::string& w) { failLine(line, w); }));
      }
    }
    return pts;
  }

  std::vector<Vec3i>
  readBinaryBody(std::span<const uint8_t> bytes, const Header& hdr, const VertexLayout& vl)
  {
    size_t pos = hdr.bodyOffset;
    auto need = [&](size_t n) {
      if (bytes.size() - pos < n)
        failOffset(pos, "unexpected end of file");
    };

    std::vector<Vec3i> pts;
    for (size_t e = 0; e <= vl.elementIndex; e++) {
      const auto& el = hdr.elements[e];
      if (e == vl.elementIndex)
        pts.reserve(el.count);
      for (size_t i = 0; i < el.count; i++) {
        size_t recordStart = pos;
        double v[3] = {0, 0, 0};
        for (size_t p = 0; p < el.props.size(); p++) {
          const auto& prop = el.props[p];
          if (prop.isList) {
            need(propSize(prop.countType));
            double n = readLittleEndian(&bytes[pos], prop.countType);
            pos += propSize(prop.countType);
            if (n < 0)
              failOffset(pos, "negative list length");
            size_t len = size_t(n) * propSize(prop.type);
            need(len);
            pos += len;
            continue;
          }
          need(propSize(prop.type));
          if (e == vl.elementIndex) {
            for (int k = 0; k < 3; k++) {
              if (vl.prop[k] == int(p))
                v[k] = readLittleEndian(&bytes[pos], prop.type);
            }
          }
          pos += propSize(prop.type);
        }
        if (e == vl.elementIndex)
          pts.push_back(quantize(
            v, [&](const std::string& w) { failOffset(recordStart, w); }));
      }
    }
    return pts;
  }

}  // namespace

PointCloud
parsePly(std::span<const uint8_t> bytes)
{
  Header hdr = parseHeader(bytes);
  VertexLayout vl = locateVertex(hdr);
  std::vector<Vec3i> pts = hdr.ascii ? readAsciiBody(bytes, hdr, vl)
                                     : readBinaryBody(bytes, hdr, vl);

  PointCloud pc = PointCloud::fromPoints(std::move(pts));
  if (hdr.bitDepth) {
    if (*hdr.bitDepth < pc.bitDepth)
      throw ParseError(
        "ply: points exceed declared bit_depth " + std::to_string(*hdr.bitDepth));
    pc.bitDepth = *hdr.bitDepth;
  }
  return pc;
}

//============================================================================

std::vector<uint8_t>
writePly(const PointCloud& pc, PlyFormat format)
{
  std::ostringstream os;
  os << "ply\n"
     << (format == PlyFormat::kAscii ? "format ascii 1.0\n"
                                     : "format binary_little_endian 1.0\n")
     << "comment bit_depth " << pc.bitDepth << '\n'
     << "element vertex " << pc.points.size() << '\n'
     << "property int x\nproperty int y\nproperty int z\n"
     << "end_header\n";

  std::string head = os.str();
  std::vector<uint8_t> out(head.begin(), head.end());

  if (format == PlyFormat::kAscii) {
    std::string body;
    body.reserve(pc.points.size() * 16);
    char buf[48];
    for (const auto& p : pc.points) {
      int n = std::snprintf(buf, sizeof buf, "%d %d %d\n", p.x, p.y, p.z);
      body.append(buf, size_t(n));
    }
    out.insert(out.end(), body.begin(), body.end());
  } else {
    size_t base = out.size();
    out.resize(base + pc.points.size() * 12);
    uint8_t* dst = out.data() + base;
    for (const auto& p : pc.points) {
      int32_t v[3] = {p.x, p.y, p.z};
      std::memcpy(dst, v, 12);
      dst += 12;
    }
  }
  return out;
}

//============================================================================

std::vector<uint8_t>
readFile(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<uint8_t> data(
    (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad())
    throw IoError("error reading '" + path.string() + "'");
  return data;
}

void
writeFile(const std::filesystem::path& path, std::span<const uint8_t> bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out)
    throw IoError("error writing '" + path.string() + "'");
}

}  // namespace svx
