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

#include "feddp/comm_metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "feddp/config.hpp"
#include "feddp/datasets.hpp"
#include "feddp/orchestrator.hpp"

namespace feddp {
namespace {

namespace fs = std::filesystem;

const ModelSpec kMlp = ModelSpec::Mlp(2, 3, 2, Activation::kTanh);

// 1456 MB of f32 parameters of which 0.21% form the trainable head.
struct ProductionScale {
  std::size_t d = 1456000000 / 4;
  std::size_t d_t = d * 21 / 10000;
  Layout layout = {{"backbone", 0, d - d_t, 1, 1, false},
                   {"head", d - d_t, d_t, 1, 1, false}};
  CommModel comm{1456.0 / 174.72, 1456000000, 0};
};

TEST(TrafficTest, FullMaskIsWholeModelPlusOverhead) {
  const auto mask = FullMask(MakeLayout(kMlp));
  const CommModel comm{8.0, 1000, 7};
  EXPECT_EQ(TrafficPerRound(mask, comm, Encoding::kDenseF32), 1007u);
}

TEST(TrafficTest, EmptyMaskIsOverheadOnly) {
  const auto mask = MakeMask(MakeLayout(kMlp), std::vector<std::string>{});
  EXPECT_EQ(TrafficPerRound(mask, CommModel{8.0, 1000, 7}, Encoding::kDenseF32), 7u);
  EXPECT_EQ(TrafficPerRound(mask, CommModel{8.0, 1000, 0}, Encoding::kDenseF32), 0u);
}

TEST(TrafficTest, DenseTrafficEqualsPayloadWhenFullModelIsDense) {
  const auto layout = MakeLayout(kMlp);
  const auto mask = MakeMask(layout, {"head.weight", "head.bias"});
  const CommModel comm{8.0, DenseModelBytes(17), 5};
  const auto w = InitializeParameters(kMlp, 0);
  const auto u = ExtractMaskedUpdate(w, w, mask, 0, 0, 1, 1);
  EXPECT_EQ(TrafficPerRound(mask, comm, Encoding::kDenseF32),
            PayloadBytes(u, Encoding::kDenseF32) + 5);
  EXPECT_EQ(TrafficPerRound(mask, comm, Encoding::kSparseIdx32F32),
            PayloadBytes(u, Encoding::kSparseIdx32F32) + 5);
}

TEST(TrafficTest, CountsMustBeConsistent) {
  const CommModel comm{8.0, 1000, 0};
  EXPECT_EQ(TrafficPerRound(3, 3, comm), 1000u);
  EXPECT_THROW(TrafficPerRound(4, 3, comm), StructuralError);
  EXPECT_THROW(TrafficPerRound(0, 0, comm), StructuralError);
}

TEST(TrafficTest, RatioIdentityOnRandomMasks) {
  std::mt19937_64 gen(31);
  const ModelSpec spec = ModelSpec::Mlp(7, 9, 4, Activation::kRelu);
  const auto layout = MakeLayout(spec);
  const auto names = LayerNames(layout);
  const CommModel comm{8.0, DenseModelBytes(ParameterCount(spec)), 0};
  for (int trial = 0; trial < 16; ++trial) {
    std::vector<std::string> chosen;
    for (std::size_t l = 0; l < names.size(); ++l) {
      if (trial & (1 << l)) chosen.push_back(names[l]);
    }
    const auto mask = MakeMask(layout, chosen);
    const auto full = TrafficPerRound(FullMask(layout), comm, Encoding::kDenseF32);
    const auto masked = TrafficPerRound(mask, comm, Encoding::kDenseF32);
    EXPECT_EQ(masked * mask.total_count(), full * mask.trainable_count());
  }
}

TEST(TrafficTest, ProductionScaleTrafficDelayAndSpeedup) {
  const ProductionScale p;
  const auto sel = MakeMask(p.layout, {"head"});
  ASSERT_DOUBLE_EQ(sel.ratio(), 0.0021);
  const auto bytes = TrafficPerRound(sel, p.comm, Encoding::kDenseF32);
  EXPECT_EQ(bytes, 3057600u);
  EXPECT_LE(std::abs(bytes / 1e6 - 3.10) / 3.10, 0.02);
  const double delay = DelaySeconds(bytes, p.comm);
  EXPECT_NEAR(delay, 0.37, 0.01);
  const double full_delay =
      DelaySeconds(TrafficPerRound(p.d, p.d, p.comm, Encoding::kDenseF32), p.comm);
  EXPECT_NEAR(full_delay, 174.72, 1e-9);
  const double speedup = full_delay / delay;
  EXPECT_NEAR(speedup, 1.0 / 0.0021, 1e-6);
  EXPECT_LE(std::abs(speedup - 470.0) / 470.0, 0.02);
}

TEST(DelayTest, LinearInBytes) {
  const CommModel comm;
  EXPECT_NEAR(comm.bandwidth_mbps, 8.3333, 1e-4);
  EXPECT_NEAR(DelaySeconds(1456000000, comm), 174.72, 1e-9);
  EXPECT_NEAR(DelaySeconds(3100000, comm), 0.372, 1e-9);
  EXPECT_EQ(DelaySeconds(0, comm), 0.0);
}

std::vector<RoundRecord> FakeRecords(std::size_t n) {
  std::vector<RoundRecord> out;
  for (std::size_t t = 1; t <= n; ++t) {
    RoundRecord r;
    r.round = t;
    r.global_loss = 1.0 / static_cast<double>(t);
    r.global_accuracy = 0.5 + 0.05 * static_cast<double>(t);
    r.epsilon_to_date = 0.1 * std::sqrt(static_cast<double>(t));
    r.bytes_up_per_client = 1234;
    r.bytes_down_per_client = 5678;
    r.modeled_delay_s = 0.125;
    r.participants = 3;
    out.push_back(r);
  }
  return out;
}

fs::path ScratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("feddp-" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(WriteRecordsTest, EmptyRunGivesHeaderAndZeroedSummary) {
  const auto dir = ScratchDir("empty");
  const auto s = WriteRecords(std::vector<RoundRecord>{}, dir, {"x", 1, 2});
  EXPECT_EQ(ReadTextFile(dir / kRoundsFile),
            "# feddp-rounds/1\nround,loss,accuracy,epsilon,bytes_up,bytes_down,delay_s,wall_s\n");
  EXPECT_EQ(s.rounds, 0u);
  EXPECT_EQ(s.total_bytes_up, 0u);
  EXPECT_EQ(s.final_accuracy, 0.0);
  EXPECT_EQ(ReadSummary(dir / kSummaryFile).total_delay_s, 0.0);
}

TEST(WriteRecordsTest, FiveRoundTotals) {
  const auto dir = ScratchDir("five");
  const auto recs = FakeRecords(5);
  const auto s = WriteRecords(recs, dir, {"five", 8, 17});
  std::istringstream csv(ReadTextFile(dir / kRoundsFile));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 2u + 5u);
  EXPECT_EQ(s.total_bytes_up, 5u * 1234u * 3u);
  EXPECT_EQ(s.total_bytes_down, 5u * 5678u * 3u);
  EXPECT_EQ(s.final_accuracy, recs.back().global_accuracy);
  EXPECT_EQ(s.final_epsilon, recs.back().epsilon_to_date);
  EXPECT_DOUBLE_EQ(s.traffic_ratio(), 8.0 / 17.0);
  const auto back = ReadSummary(dir / kSummaryFile);
  EXPECT_EQ(back.total_bytes_up, s.total_bytes_up);
  EXPECT_EQ(back.final_loss, s.final_loss);
  EXPECT_EQ(back.label, "five");
}

TEST(WriteRecordsTest, RewritingIsIdempotent) {
  const auto dir = ScratchDir("idem");
  const auto recs = FakeRecords(4);
  WriteRecords(recs, dir, {"i", 1, 1});
  const auto first = ReadTextFile(dir / kRoundsFile) + ReadTextFile(dir / kSummaryFile);
  WriteRecords(recs, dir, {"i", 1, 1});
  EXPECT_EQ(ReadTextFile(dir / kRoundsFile) + ReadTextFile(dir / kSummaryFile), first);
}

TEST(WriteRecordsTest, TotalsAreLinearInRounds) {
  const auto four = Summarize(FakeRecords(4), {});
  const auto eight = Summarize(FakeRecords(8), {});
  EXPECT_EQ(eight.total_bytes_up, 2 * four.total_bytes_up);
  EXPECT_EQ(eight.total_delay_s, 2 * four.total_delay_s);
}

TEST(WriteRecordsTest, UnwritablePathIsIoError) {
  const auto blocker = ScratchDir("blocker");
  WriteTextFile(blocker, "not a directory");
  EXPECT_THROW(WriteRecords(FakeRecords(1), blocker / "sub", {}), IoError);
  EXPECT_THROW(ReadSummary(blocker / "missing.txt"), IoError);
}

std::string RunReference() {
  const RunConfig cfg = ParseConfigFile(fs::path(FEDDP_CONFIG_DIR) / "reference.cfg");
  const TrainTest data = BuildDatasets(cfg.dataset);
  const auto result = RunExperiment(cfg.experiment, data.train, data.test);
  return RenderRoundsCsv(result.records);
}

TEST(GoldenTest, ReferenceRunMatchesFrozenRoundsFile) {
  const std::string first = RunReference();
  EXPECT_EQ(RunReference(), first);
  EXPECT_EQ(first, ReadTextFile(fs::path(FEDDP_TESTDATA_DIR) / "reference_rounds.csv"));
}

}  // namespace
}  // namespace feddp
