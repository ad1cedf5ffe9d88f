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

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace svx {

//============================================================================
// Process exit codes of the svx tool.

enum ExitCode : int
{
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitParse = 4,
  kExitCorrupt = 5,
  kExitModel = 6,
  kExitDiverged = 7,
};

// Environment variable naming the default weight file.
inline constexpr const char* kWeightsEnv = "SVX_WEIGHTS";

//============================================================================
// Evaluation report

struct EvalRow {
  std::string name;
  size_t points = 0;
  uint64_t totalBits = 0;
  uint64_t octreeBits = 0;
  uint64_t order0Bits = 0;
  double encodeSeconds = 0;
  double decodeSeconds = 0;
  std::optional<bool> lossless;
  std::optional<double> gpccBpov;

  double bpov() const { return points ? double(totalBits) / double(points) : 0.0; }
  double octreeSharePct() const
  {
    return totalBits ? 100.0 * double(octreeBits) / double(totalBits) : 0.0;
  }
  double order0Bpov() const { return points ? double(order0Bits) / double(points) : 0.0; }
  // Bitrate reduction relative to the order-0 coder, percent.
  double gainPct() const
  {
    return order0Bits ? 100.0 * (1.0 - double(totalBits) / double(order0Bits)) : 0.0;
  }
};

// Corpus totals: bit counts and times are summed, so every rate in the
// result is the points-weighted average of the rows.
EvalRow averageRow(std::span<const EvalRow> rows);

enum class ReportFormat
{
  kText,
  kJson,
  kCsv,
};

void writeReport(std::ostream& out, std::span<const EvalRow> rows, ReportFormat format);

//============================================================================

// Runs the svx command line in-process and returns the exit code.
int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace svx
