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

#include "svx/cli.h"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "svx/baseline.h"
#include "svx/codec.h"
#include "svx/errors.h"
#include "svx/parallel.h"
#include "svx/synth.h"
#include "svx/training.h"

namespace svx {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

//============================================================================
// Report

EvalRow
averageRow(std::span<const EvalRow> rows)
{
  EvalRow avg;
  avg.name = "average";
  bool allLossless = true, anyLossless = false;
  double gpccBits = 0;
  size_t gpccPoints = 0;
  for (const auto& r : rows) {
    avg.points += r.points;
    avg.totalBits += r.totalBits;
    avg.octreeBits += r.octreeBits;
    avg.order0Bits += r.order0Bits;
    avg.encodeSeconds += r.encodeSeconds;
    avg.decodeSeconds += r.decodeSeconds;
    if (r.lossless) {
      anyLossless = true;
      allLossless = allLossless && *r.lossless;
    }
    if (r.gpccBpov) {
      gpccBits += *r.gpccBpov * double(r.points);
      gpccPoints += r.points;
    }
  }
  if (anyLossless)
    avg.lossless = allLossless;
  if (gpccPoints)
    avg.gpccBpov = gpccBits / double(gpccPoints);
  return avg;
}

namespace {

  Json rowJson(const EvalRow& r)
  {
    Json j;
    j["name"] = r.name;
    j["points"] = r.points;
    j["total_bits"] = r.totalBits;
    j["bpov"] = r.bpov();
    j["octree_bits"] = r.octreeBits;
    j["octree_share_pct"] = r.octreeSharePct();
    if (r.order0Bits) {
      j["order0_bits"] = r.order0Bits;
      j["order0_bpov"] = r.order0Bpov();
      j["gain_over_order0_pct"] = r.gainPct();
    }
    j["encode_seconds"] = r.encodeSeconds;
    if (r.lossless) {
      j["decode_seconds"] = r.decodeSeconds;
      j["lossless"] = *r.lossless;
    }
    if (r.gpccBpov) {
      j["gpcc_bpov"] = *r.gpccBpov;
      j["gain_over_gpcc_pct"] = 100.0 * (1.0 - r.bpov() / *r.gpccBpov);
    }
    return j;
  }

}  // namespace

void
writeReport(std::ostream& out, std::span<const EvalRow> rows, ReportFormat format)
{
  std::vector<Json> objs;
  for (const auto& r : rows)
    objs.push_back(rowJson(r));

  if (format == ReportFormat::kJson) {
    Json doc;
    doc["rows"] = objs;
    if (rows.size() > 1)
      doc["average"] = rowJson(averageRow(rows));
    out << doc.dump(2) << "\n";
    return;
  }

  if (rows.size() > 1)
    objs.push_back(rowJson(averageRow(rows)));

  // Union of the columns, in first-seen order.
  std::vector<std::string> cols;
  for (const auto& o : objs)
    for (const auto& [k, v] : o.items())
      if (std::find(cols.begin(), cols.end(), k) == cols.end())
        cols.push_back(k);

  auto cell = [](const Json& v) -> std::string {
    if (v.is_null())
      return "";
    if (v.is_string())
      return v.get<std::string>();
    if (v.is_boolean())
      return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) {
      std::ostringstream s;
      s << std::setprecision(6) << v.get<double>();
      return s.str();
    }
    return v.dump();
  };

  if (format == ReportFormat::kCsv) {
    for (size_t c = 0; c < cols.size(); c++)
      out << (c ? "," : "") << cols[c];
    out << "\n";
    for (const auto& o : objs) {
      for (size_t c = 0; c < cols.size(); c++)
        out << (c ? "," : "") << cell(o.value(cols[c], Json()));
      out << "\n";
    }
    return;
  }

  for (const auto& o : objs) {
    out << o.value("name", std::string()) << ":";
    for (const auto& [k, v] : o.items())
      if (k != "name")
        out << " " << k << "=" << cell(v);
    out << "\n";
  }
}

//============================================================================
// Commands

namespace {

  struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  double secondsSince(std::chrono::steady_clock::time_point t0)
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  std::string resolveWeights(const std::string& flag)
  {
    if (!flag.empty())
      return flag;
    if (const char* env = std::getenv(kWeightsEnv); env && *env)
      return env;
    throw UsageError(std::string("no weight file: pass --weights or set ") + kWeightsEnv);
  }

  ModelWeights<float> loadWeights(const std::string& path)
  {
    if (!fs::exists(path))
      throw IoError("weight file not found: " + path);
    return parseWeights(readFile(path));
  }

  PointCloud loadCloud(const std::string& path, int bitDepth)
  {
    auto pc = parsePly(readFile(path));
    if (bitDepth) {
      try {
        pc = withBitDepth(std::move(pc), bitDepth);
      } catch (const std::invalid_argument& e) {
        throw UsageError(path + ": " + e.what());
      }
    }
    if (pc.empty())
      throw UsageError(path + ": point cloud is empty, nothing to encode");
    return pc;
  }

  std::vector<fs::path> listPly(const std::string& dir)
  {
    if (!fs::is_directory(dir))
      throw IoError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".ply")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw IoError("no .ply files in " + dir);
    return files;
  }

  ReportFormat parseFormat(const std::string& s)
  {
    if (s == "json")
      return ReportFormat::kJson;
    if (s == "csv")
      return ReportFormat::kCsv;
    return ReportFormat::kText;
  }

  std::map<std::string, double> loadGpccTable(const std::string& path)
  {
    std::map<std::string, double> table;
    const auto bytes = readFile(path);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
      lineNo++;
      if (line.empty() || line[0] == '#')
        continue;
      auto comma = line.find(',');
      if (comma == std::string::npos)
        throw ParseError(path + ":" + std::to_string(lineNo) + ": expected name,bpov");
      const std::string name = line.substr(0, comma);
      try {
        table[name] = std::stod(line.substr(comma + 1));
      } catch (const std::exception&) {
        if (lineNo == 1)
          continue;  // header
        throw ParseError(path + ":" + std::to_string(lineNo) + ": bad bpov value");
      }
    }
    return table;
  }

  struct NetworkFlags {
    int blockSize = 64;
    int mixtures = 5;
    int filters = 64;
    int kernel = 3;
    int residualBlocks = 2;

    void add(CLI::App* app)
    {
      app->add_option("--mixtures", mixtures, "Logistic mixture components")->capture_default_str();
      app->add_option("--filters", filters, "Hidden channels")->capture_default_str();
      app->add_option("--kernel", kernel, "Kernel size (odd)")->capture_default_str();
      app->add_option("--residual-blocks", residualBlocks, "Residual blocks")
        ->capture_default_str();
    }

    NetworkConfig config() const
    {
      NetworkConfig cfg{blockSize, mixtures, filters, kernel, residualBlocks};
      try {
        cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      return cfg;
    }
  };

}  // namespace

int
runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"svx: lossless point cloud geometry codec with a learned context model"};
  app.name("svx");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read flags from a TOML/INI file");
  uint64_t seed = 1;
  int threads = 1;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads")->capture_default_str()->check(
    CLI::PositiveNumber);

  std::string weightsFlag, reportFlag = "text";
  auto addWeights = [&](CLI::App* cmd) {
    cmd->add_option(
      "--weights", weightsFlag,
      std::string("Weight file (default: $") + kWeightsEnv + ")");
  };
  auto addReport = [&](CLI::App* cmd) {
    cmd->add_option("--report", reportFlag, "Report format")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();
  };

  // encode
  auto* encode = app.add_subcommand("encode", "Encode a PLY point cloud");
  std::string encIn, encOut;
  int blockSize = 64, bitDepth = 0;
  encode->add_option("input", encIn, "Input .ply")->required();
  encode->add_option("-o,--output", encOut, "Output .svx")->required();
  encode->add_option("--block-size", blockSize, "Coding block size (power of two, 2..128)")
    ->capture_default_str();
  encode->add_option("--bit-depth", bitDepth, "Override the inferred bit depth");
  addWeights(encode);
  addReport(encode);

  // decode
  auto* decode = app.add_subcommand("decode", "Decode a bitstream to PLY");
  std::string decIn, decOut, strategy = "incremental";
  bool binary = false;
  decode->add_option("input", decIn, "Input .svx")->required();
  decode->add_option("-o,--output", decOut, "Output .ply")->required();
  decode->add_option("--strategy", strategy, "Block decoding strategy")
    ->check(CLI::IsMember({"incremental", "from-scratch"}))
    ->capture_default_str();
  decode->add_flag("--binary", binary, "Write binary little-endian PLY");
  addWeights(decode);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate bitrates over a directory of PLY files");
  std::string corpus, gpccFile;
  bool skipDecode = false;
  eval->add_option("corpus", corpus, "Directory of .ply files")->required();
  eval->add_option("--block-size", blockSize, "Coding block size")->capture_default_str();
  eval->add_option("--bit-depth", bitDepth, "Override the inferred bit depth");
  eval->add_option("--gpcc-bpov", gpccFile, "CSV of name,bpov from an external G-PCC run");
  eval->add_flag("--skip-decode", skipDecode, "Do not decode to verify losslessness");
  addWeights(eval);
  addReport(eval);

  // synth
  auto* synth = app.add_subcommand("synth", "Write procedural point clouds");
  std::string shape = "sphere", synthDir;
  int count = 1;
  size_t points = 20000;
  int synthDepth = 10;
  synth->add_option("--shape", shape, "sphere|box|plane|torus|terrain|solid|uniform|random|structured")
    ->capture_default_str();
  synth->add_option("--count", count, "Number of clouds")->capture_default_str()->check(
    CLI::PositiveNumber);
  synth->add_option("--points", points, "Approximate points per cloud")->capture_default_str();
  synth->add_option("--bit-depth", synthDepth, "Bit depth")->capture_default_str()->check(
    CLI::Range(1, 16));
  synth->add_option("-o,--output", synthDir, "Output directory")->required();

  // train
  auto* trainCmd = app.add_subcommand("train", "Train a model on a directory of PLY files");
  std::string trainCorpus, trainOut, metricsFile, initFile;
  NetworkFlags net;
  TrainConfig tc;
  bool noRotate = false, noSubsample = false;
  trainCmd->add_option("corpus", trainCorpus, "Directory of .ply files")->required();
  trainCmd->add_option("-o,--output", trainOut, "Output weight file")->required();
  trainCmd->add_option("--block-size", net.blockSize, "Training block size")->capture_default_str();
  net.add(trainCmd);
  trainCmd->add_option("--init", initFile, "Start from an existing weight file");
  trainCmd->add_option("--lr", tc.learningRate, "Adam learning rate")->capture_default_str();
  trainCmd->add_option("--batch-size", tc.batchSize, "Blocks per batch")->capture_default_str();
  trainCmd->add_option("--accumulation-steps", tc.accumulationSteps, "Batches per update")
    ->capture_default_str();
  trainCmd->add_option("--patience", tc.patience, "Early stopping patience (epochs)")
    ->capture_default_str();
  trainCmd->add_option("--epochs", tc.maxEpochs, "Maximum epochs")->capture_default_str();
  trainCmd->add_option("--validation-fraction", tc.validationFraction, "Held-out block fraction")
    ->capture_default_str();
  trainCmd->add_flag("--no-rotate", noRotate, "Disable rotation augmentation");
  trainCmd->add_flag("--no-subsample", noSubsample, "Disable subsampling augmentation");
  trainCmd->add_option("--metrics", metricsFile, "Write JSON-lines metrics here (default stdout)");

  // init-weights
  auto* initCmd = app.add_subcommand("init-weights", "Write randomly initialised weights");
  std::string initOut;
  NetworkFlags initNet;
  initCmd->add_option("-o,--output", initOut, "Output weight file")->required();
  initCmd->add_option("--block-size", initNet.blockSize, "Nominal block size")->capture_default_str();
  initNet.add(initCmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*encode) {
      auto weights = loadWeights(resolveWeights(weightsFlag));
      auto pc = loadCloud(encIn, bitDepth);
      CodecParams params;
      params.blockSize = blockSize;
      params.threads = threads;
      CodingStats stats;
      const auto t0 = std::chrono::steady_clock::now();
      Bitstream bs;
      try {
        bs = encodePointCloud(pc, weights, params, &stats);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const double secs = secondsSince(t0);
      writeFile(encOut, bs.serialize());

      EvalRow row;
      row.name = fs::path(encIn).filename().string();
      row.points = stats.points;
      row.totalBits = stats.totalBits;
      row.octreeBits = stats.octreeBits;
      row.encodeSeconds = secs;
      std::vector<EvalRow> rows{row};
      writeReport(out, rows, parseFormat(reportFlag));
    } else if (*decode) {
      auto weights = loadWeights(resolveWeights(weightsFlag));
      auto bs = Bitstream::parse(readFile(decIn));
      checkModel(bs, weights);
      CodecParams params;
      params.threads = threads;
      params.strategy =
        strategy == "from-scratch" ? DecodeStrategy::kFromScratch : DecodeStrategy::kIncremental;
      const auto t0 = std::chrono::steady_clock::now();
      auto pc = decodePointCloud(bs, weights, params);
      const double secs = secondsSince(t0);
      writeFile(decOut, writePly(pc, binary ? PlyFormat::kBinaryLittleEndian : PlyFormat::kAscii));
      out << fs::path(decIn).filename().string() << ": points=" << pc.size()
          << " decode_seconds=" << secs << "\n";
    } else if (*eval) {
      auto weights = loadWeights(resolveWeights(weightsFlag));
      auto files = listPly(corpus);
      std::map<std::string, double> gpcc;
      if (!gpccFile.empty())
        gpcc = loadGpccTable(gpccFile);

      std::vector<EvalRow> rows(files.size());
      parallelFor(files.size(), threads, [&](size_t i) {
        auto pc = loadCloud(files[i].string(), bitDepth);
        CodecParams params;
        params.blockSize = blockSize;
        CodingStats stats;
        auto t0 = std::chrono::steady_clock::now();
        auto bs = encodePointCloud(pc, weights, params, &stats);
        EvalRow& r = rows[i];
        r.encodeSeconds = secondsSince(t0);
        r.name = files[i].filename().string();
        r.points = stats.points;
        r.totalBits = stats.totalBits;
        r.octreeBits = stats.octreeBits;
        r.order0Bits = encodeOrder0(pc, blockSize).totalBits();
        if (!skipDecode) {
          t0 = std::chrono::steady_clock::now();
          r.lossless = decodePointCloud(bs, weights, params) == pc;
          r.decodeSeconds = secondsSince(t0);
        }
        if (auto it = gpcc.find(r.name); it != gpcc.end())
          r.gpccBpov = it->second;
        else if (auto it2 = gpcc.find(files[i].stem().string()); it2 != gpcc.end())
          r.gpccBpov = it2->second;
      });
      writeReport(out, rows, parseFormat(reportFlag));
      for (const auto& r : rows)
        if (r.lossless && !*r.lossless) {
          err << "svx: " << r.name << " did not round-trip\n";
          return kExitInternal;
        }
    } else if (*synth) {
      fs::create_directories(synthDir);
      std::mt19937_64 rng(seed);
      std::vector<PointCloud> clouds;
      std::vector<std::string> names;
      if (shape == "structured") {
        clouds = structuredCorpus(size_t(count), synthDepth, points, seed);
        for (int i = 0; i < count; i++)
          names.push_back("structured_" + std::to_string(i));
      } else {
        std::optional<ShapeKind> kind;
        if (shape != "random") {
          kind = parseShapeKind(shape);
          if (!kind)
            throw UsageError("unknown shape: " + shape);
        }
        for (int i = 0; i < count; i++) {
          const uint64_t s = rng();
          clouds.push_back(
            kind ? synthesizeShape(*kind, synthDepth, points, s) : randomCloud(synthDepth, points, s));
          names.push_back(shape + "_" + std::to_string(i));
        }
      }
      for (size_t i = 0; i < clouds.size(); i++) {
        const auto path = fs::path(synthDir) / (names[i] + ".ply");
        writeFile(path, writePly(clouds[i], PlyFormat::kBinaryLittleEndian));
        out << path.string() << ": points=" << clouds[i].size() << "\n";
      }
    } else if (*trainCmd) {
      tc.seed = seed;
      tc.threads = threads;
      tc.rotate = !noRotate;
      tc.subsample = !noSubsample;
      try {
        tc.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      std::vector<PointCloud> clouds;
      for (const auto& f : listPly(trainCorpus))
        clouds.push_back(parsePly(readFile(f)));
      auto dataset = makeDataset(clouds, net.blockSize, seed, tc.validationFraction);
      auto initial = initFile.empty() ? initializeWeights(net.config(), seed) : loadWeights(initFile);

      std::ofstream metricsOut;
      if (!metricsFile.empty()) {
        metricsOut.open(metricsFile);
        if (!metricsOut)
          throw IoError("cannot open " + metricsFile);
      }
      std::ostream& mout = metricsFile.empty() ? out : metricsOut;
      auto res = train(dataset, initial, tc, [&](const EpochMetrics& m) {
        Json a{{"epoch", m.epoch}, {"split", "train"}, {"nll_bits_per_voxel", m.trainBitsPerVoxel},
               {"bpov", m.trainBpov}, {"wall_seconds", m.seconds}, {"optimizer_steps", m.optimizerSteps}};
        Json b{{"epoch", m.epoch}, {"split", "validation"},
               {"nll_bits_per_voxel", m.validationBitsPerVoxel}, {"bpov", m.validationBpov},
               {"wall_seconds", m.seconds}, {"improved", m.improved}};
        mout << a.dump() << "\n" << b.dump() << "\n" << std::flush;
      });
      writeFile(trainOut, serializeWeights(res.weights));
      err << "svx: trained on " << dataset.train.size() << " blocks ("
          << dataset.validation.size() << " held out); best epoch " << res.bestEpoch << "\n";
    } else if (*initCmd) {
      writeFile(initOut, serializeWeights(initializeWeights(initNet.config(), seed)));
    }
  } catch (const UsageError& e) {
    err << "svx: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "svx: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    err << "svx: " << e.what() << "\n";
    return kExitParse;
  } catch (const CorruptBitstream& e) {
    err << "svx: corrupt bitstream: " << e.what() << "\n";
    return kExitCorrupt;
  } catch (const ModelMismatch& e) {
    err << "svx: " << e.what() << "\n";
    return kExitModel;
  } catch (const ModelError& e) {
    err << "svx: model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const TrainingDiverged& e) {
    err << "svx: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const fs::filesystem_error& e) {
    err << "svx: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "svx: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace svx
