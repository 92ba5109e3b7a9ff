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

// Run directory rendering and the final-model file.

#ifndef FEDDP_REPORT_HPP_
#define FEDDP_REPORT_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "feddp/comm_metrics.hpp"
#include "feddp/errors.hpp"
#include "feddp/model.hpp"

namespace feddp {

inline constexpr const char* kModelFile = "model.txt";

// "# feddp-model/1", one "layer <name> <offset> <length>" line per layer,
// then one %.17g value per line.
inline void WriteModelFile(const ParameterVector& p,
                           const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# feddp-model/1\n";
  for (const auto& l : p.layout) {
    out << "layer " << l.name << ' ' << l.offset << ' ' << l.length << '\n';
  }
  for (double v : p.values) out << FormatReal(v) << '\n';
  WriteTextFile(path, out.str());
}

struct ReportRow {
  std::string run;  // path relative to the report root
  RunSummary summary;
};

inline std::vector<ReportRow> CollectRuns(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw IoError("'" + dir.string() + "' is not a directory");
  }
  std::vector<ReportRow> rows;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != kSummaryFile) {
      continue;
    }
    const fs::path run_dir = entry.path().parent_path();
    if (!fs::exists(run_dir / kRoundsFile)) {
      throw IoError("'" + run_dir.string() + "' has " + kSummaryFile +
                    " but no " + kRoundsFile);
    }
    std::string rel = fs::relative(run_dir, dir).generic_string();
    if (rel.empty()) rel = ".";
    rows.push_back({rel, ReadSummary(entry.path())});
  }
  if (rows.empty()) {
    throw IoError("no runs found under '" + dir.string() + "' (expected " +
                  kSummaryFile + " and " + kRoundsFile + ")");
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.run < b.run; });
  return rows;
}

// One row per run: accuracy, epsilon, per-client per-round upload, the
// fraction of coordinates transmitted, modeled delay per round and runtime.
inline std::string RenderReport(const std::filesystem::path& dir) {
  const std::vector<ReportRow> rows = CollectRuns(dir);
  std::size_t name_width = 5;
  for (const auto& r : rows) {
    const std::string name = r.summary.label.empty() ? r.run : r.summary.label;
    name_width = std::max(name_width, name.size());
  }
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %12s %10s %14s %14s %15s %13s\n",
                static_cast<int>(name_width), "Model", "Accuracy(%)", "Epsilon",
                "Traffic(MB)", "Traffic ratio", "Comm.Delay(s)", "Runtime(min)");
  out << buf;
  for (const auto& r : rows) {
    const RunSummary& s = r.summary;
    const std::string name = s.label.empty() ? r.run : s.label;
    const double delay =
        s.rounds == 0 ? 0.0 : s.total_delay_s / static_cast<double>(s.rounds);
    std::snprintf(buf, sizeof(buf),
                  "%-*s %12.2f %10.4g %14.6g %14.6f %15.4f %13.2f\n",
                  static_cast<int>(name_width), name.c_str(),
                  100.0 * s.final_accuracy, s.final_epsilon,
                  static_cast<double>(s.bytes_up_per_client_round) /
                      kBytesPerMegabyte,
                  s.traffic_ratio(), delay, s.total_wall_s / 60.0);
    out << buf;
  }
  return out.str();
}

}  // namespace feddp

#endif  // FEDDP_REPORT_HPP_
