/*
 * Copyright 2026 The FedDP Simulator Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Communication cost model and the per-round metrics sink.
//
// Traffic per client per round under selective tuning is (d_t / d) * B_f,
// where B_f is the upload size of the full model. Delay is bytes divided by
// bandwidth. One megabyte is 10^6 bytes throughout.
//
// Output files written by WriteRecords:
//
//   rounds.csv   line 1: "# feddp-rounds/1"
//                line 2: "round,loss,accuracy,epsilon,bytes_up,bytes_down,delay_s,wall_s"
//                then one line per round, reals printed with %.17g
//   summary.txt  "key=value" lines in a fixed order, first key "format"

#ifndef FEDDP_COMM_METRICS_HPP_
#define FEDDP_COMM_METRICS_HPP_

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "feddp/errors.hpp"
#include "feddp/partition.hpp"

namespace feddp {

inline constexpr double kBytesPerMegabyte = 1e6;

struct CommModel {
  double bandwidth_mbps = 1456.0 / 174.72;  // megabytes per second
  std::uint64_t full_model_bytes = 0;
  std::uint64_t overhead_bytes = 0;

  void Validate() const {
    if (!(bandwidth_mbps > 0.0)) throw DomainError("bandwidth must be > 0");
    if (full_model_bytes == 0) {
      throw DomainError("full model size B_f must be > 0");
    }
  }
};

// Full-model upload size at 32-bit precision.
inline std::uint64_t DenseModelBytes(std::size_t parameter_count) {
  return static_cast<std::uint64_t>(parameter_count) * 4;
}

// Bytes one client uploads per round when `trainable` of `total`
// coordinates are sent: (d_t / d) * B_f, rounded to the nearest byte.
inline std::uint64_t TrafficPerRound(std::size_t trainable, std::size_t total,
                                     const CommModel& comm,
                                     Encoding encoding = Encoding::kDenseF32) {
  comm.Validate();
  if (total == 0) throw StructuralError("empty mask");
  if (trainable > total) {
    throw StructuralError("more trainable than total coordinates");
  }
  const auto d = static_cast<unsigned __int128>(total);
  const auto dt = static_cast<unsigned __int128>(trainable);
  // Sparse doubles the per-value cost (index + value) and adds the header.
  const unsigned __int128 factor = encoding == Encoding::kDenseF32 ? 1 : 2;
  const unsigned __int128 scaled =
      (static_cast<unsigned __int128>(comm.full_model_bytes) * dt * factor +
       d / 2) / d;
  std::uint64_t bytes = static_cast<std::uint64_t>(scaled);
  if (encoding == Encoding::kSparseIdx32F32) bytes += kWireHeaderBytes;
  return bytes + comm.overhead_bytes;
}

inline std::uint64_t TrafficPerRound(const PartitionMask& mask,
                                     const CommModel& comm,
                                     Encoding encoding = Encoding::kDenseF32) {
  return TrafficPerRound(mask.trainable_count(), mask.total_count(), comm,
                         encoding);
}

inline double DelaySeconds(std::uint64_t bytes, const CommModel& comm) {
  if (!(comm.bandwidth_mbps > 0.0)) throw DomainError("bandwidth must be > 0");
  return static_cast<double>(bytes) / (comm.bandwidth_mbps * kBytesPerMegabyte);
}

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  double global_loss = 0.0;
  double global_accuracy = 0.0;
  double epsilon_to_date = 0.0;
  std::uint64_t bytes_up_per_client = 0;
  std::uint64_t bytes_down_per_client = 0;
  double modeled_delay_s = 0.0;
  double wall_time_s = 0.0;
  std::size_t participants = 0;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

// Descriptive fields stored alongside the records.
struct RunInfo {
  std::string label;
  std::size_t trainable_params = 0;
  std::size_t total_params = 0;
};

struct RunSummary {
  std::string label;
  std::size_t rounds = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  double final_epsilon = 0.0;
  std::uint64_t bytes_up_per_client_round = 0;
  std::uint64_t total_bytes_up = 0;
  std::uint64_t total_bytes_down = 0;
  double total_delay_s = 0.0;
  double total_wall_s = 0.0;
  std::size_t trainable_params = 0;
  std::size_t total_params = 0;

  double traffic_ratio() const {
    return total_params == 0 ? 0.0
                             : static_cast<double>(trainable_params) /
                                   static_cast<double>(total_params);
  }
};

inline constexpr const char* kRoundsFile = "rounds.csv";
inline constexpr const char* kSummaryFile = "summary.txt";
inline constexpr const char* kRoundsVersionLine = "# feddp-rounds/1";
inline constexpr const char* kRoundsHeader =
    "round,loss,accuracy,epsilon,bytes_up,bytes_down,delay_s,wall_s";
inline constexpr const char* kSummaryFormat = "feddp-summary/1";

inline std::string FormatReal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline RunSummary Summarize(std::span<const RoundRecord> records,
                            const RunInfo& info) {
  RunSummary s;
  s.label = info.label;
  s.trainable_params = info.trainable_params;
  s.total_params = info.total_params;
  s.rounds = records.size();
  for (const auto& r : records) {
    s.total_bytes_up += r.bytes_up_per_client * r.participants;
    s.total_bytes_down += r.bytes_down_per_client * r.participants;
    s.total_delay_s += r.modeled_delay_s;
    s.total_wall_s += r.wall_time_s;
  }
  if (!records.empty()) {
    const auto& last = records.back();
    s.final_loss = last.global_loss;
    s.final_accuracy = last.global_accuracy;
    s.final_epsilon = last.epsilon_to_date;
    s.bytes_up_per_client_round = records.front().bytes_up_per_client;
  }
  return s;
}

inline std::string RenderRoundsCsv(std::span<const RoundRecord> records) {
  std::ostringstream out;
  out << kRoundsVersionLine << '\n' << kRoundsHeader << '\n';
  for (const auto& r : records) {
    out << r.round << ',' << FormatReal(r.global_loss) << ','
        << FormatReal(r.global_accuracy) << ','
        << FormatReal(r.epsilon_to_date) << ',' << r.bytes_up_per_client << ','
        << r.bytes_down_per_client << ',' << FormatReal(r.modeled_delay_s)
        << ',' << FormatReal(r.wall_time_s) << '\n';
  }
  return out.str();
}

inline std::string RenderSummary(const RunSummary& s) {
  std::ostringstream out;
  out << "format=" << kSummaryFormat << '\n'
      << "label=" << s.label << '\n'
      << "rounds=" << s.rounds << '\n'
      << "final_loss=" << FormatReal(s.final_loss) << '\n'
      << "final_accuracy=" << FormatReal(s.final_accuracy) << '\n'
      << "final_epsilon=" << FormatReal(s.final_epsilon) << '\n'
      << "bytes_up_per_client_round=" << s.bytes_up_per_client_round << '\n'
      << "total_bytes_up=" << s.total_bytes_up << '\n'
      << "total_bytes_down=" << s.total_bytes_down << '\n'
      << "total_delay_s=" << FormatReal(s.total_delay_s) << '\n'
      << "total_wall_s=" << FormatReal(s.total_wall_s) << '\n'
      << "trainable_params=" << s.trainable_params << '\n'
      << "total_params=" << s.total_params << '\n';
  return out.str();
}

inline void WriteTextFile(const std::filesystem::path& path,
                          const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes rounds.csv and summary.txt into `dir` (created if needed).
inline RunSummary WriteRecords(std::span<const RoundRecord> records,
                               const std::filesystem::path& dir,
                               const RunInfo& info) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + dir.string() +
                  "': " + ec.message());
  }
  RunSummary s = Summarize(records, info);
  WriteTextFile(dir / kRoundsFile, RenderRoundsCsv(records));
  WriteTextFile(dir / kSummaryFile, RenderSummary(s));
  return s;
}

inline RunSummary ReadSummary(const std::filesystem::path& path) {
  std::istringstream in(ReadTextFile(path));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv["format"] != kSummaryFormat) {
    throw IoError("'" + path.string() + "' is not a " + kSummaryFormat +
                  " file");
  }
  auto field = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      throw IoError("summary '" + path.string() + "' lacks key " + key);
    }
    return it->second;
  };
  auto num = [&](const char* key) { return std::stod(field(key)); };
  auto count = [&](const char* key) -> std::uint64_t {
    return std::stoull(field(key));
  };
  RunSummary s;
  s.label = kv["label"];
  s.rounds = count("rounds");
  s.final_loss = num("final_loss");
  s.final_accuracy = num("final_accuracy");
  s.final_epsilon = num("final_epsilon");
  s.bytes_up_per_client_round = count("bytes_up_per_client_round");
  s.total_bytes_up = count("total_bytes_up");
  s.total_bytes_down = count("total_bytes_down");
  s.total_delay_s = num("total_delay_s");
  s.total_wall_s = num("total_wall_s");
  s.trainable_params = count("trainable_params");
  s.total_params = count("total_params");
  return s;
}

}  // namespace feddp

#endif  // FEDDP_COMM_METRICS_HPP_
