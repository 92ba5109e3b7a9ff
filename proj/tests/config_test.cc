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

#include "feddp/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "feddp/report.hpp"
#include "feddp/sweep.hpp"

namespace feddp {
namespace {

namespace fs = std::filesystem;

constexpr const char* kMinimal =
    "[model]\nkind = mlp\n[federation]\nclients = 2\nrounds = 3\n";

std::string ErrorOf(const std::string& text,
                    const std::vector<std::string>& overrides = {}) {
  try {
    ParseConfigText(text, overrides);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

TEST(ParseConfigTest, MinimalConfigGetsDefaults) {
  const RunConfig cfg = ParseConfigText(kMinimal);
  const auto& ex = cfg.experiment;
  EXPECT_EQ(ex.clients, 2u);
  EXPECT_EQ(ex.rounds, 3u);
  EXPECT_EQ(ex.local_epochs, 5u);
  EXPECT_EQ(ex.batch_size, 32u);
  EXPECT_EQ(ex.model.input_dim, 2u);
  EXPECT_EQ(ex.model.output_dim, 2u);
  EXPECT_EQ(ex.dp.clip_norm, 1.0);
  EXPECT_EQ(ex.delta, 1e-4);
  EXPECT_FALSE(ex.target_epsilon);
  const std::string dump = DumpConfig(cfg);
  EXPECT_EQ(dump.rfind("# feddp-config/1\n", 0), 0u);
  for (const auto& key : ConfigKeys()) {
    EXPECT_NE(dump.find("\n" + key + " = "), std::string::npos) << key;
  }
}

TEST(ParseConfigTest, EpsilonOverrideResolvesSigma) {
  const RunConfig cfg = ParseConfigText(kMinimal, {"privacy.epsilon=0.65"});
  ASSERT_TRUE(cfg.experiment.target_epsilon);
  const TrainTest data = BuildDatasets(cfg.dataset);
  const auto shards = PartitionData(data.train, 2, PartitionScheme::kIid, 1.0,
                                    cfg.experiment.seeds.data);
  const std::size_t smallest = std::min(shards[0].n_k, shards[1].n_k);
  const double q = 32.0 / static_cast<double>(smallest);
  EXPECT_EQ(cfg.experiment.dp.noise_multiplier, SigmaForTarget(q, 3 * 5, 1e-4, 0.65));
}

TEST(ParseConfigTest, ZeroClientsNamesTheField) {
  EXPECT_NE(ErrorOf(kMinimal, {"federation.clients=0"}).find("federation.clients"),
            std::string::npos);
}

TEST(ParseConfigTest, RejectsBadInput) {
  EXPECT_NE(ErrorOf(kMinimal, {"federation.clientz=2"}).find("federation.clientz"),
            std::string::npos);
  EXPECT_NE(ErrorOf(std::string(kMinimal) + "bogus = 1\n").find("bogus"),
            std::string::npos);
  EXPECT_NE(ErrorOf("[model]\nkind = mlp\n[federation]\nclients = 2\n").find("federation.rounds"),
            std::string::npos);
  EXPECT_NE(ErrorOf(kMinimal, {"dp.clip_norm=abc"}).find("dp.clip_norm"), std::string::npos);
  EXPECT_NE(ErrorOf(kMinimal, {"model.kind=resnet"}).find("model.kind"), std::string::npos);
  EXPECT_NE(ErrorOf(kMinimal, {"mask.layers=stage4"}).find("stage4"), std::string::npos);
  EXPECT_NE(ErrorOf(kMinimal, {"federation.participation=0"}).find("participation"),
            std::string::npos);
  EXPECT_NE(ErrorOf(kMinimal, {"no-equals-sign"}).find("no-equals-sign"), std::string::npos);
  EXPECT_FALSE(ErrorOf("[model\nkind = mlp\n").empty());
}

TEST(ParseConfigTest, MissingFileIsIoError) {
  EXPECT_THROW(ParseConfigFile("/nonexistent/feddp.cfg"), IoError);
}

TEST(ParseConfigTest, ShippedConfigsParse) {
  std::size_t count = 0;
  for (const auto& e : fs::recursive_directory_iterator(FEDDP_CONFIG_DIR)) {
    if (e.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(ParseConfigFile(e.path())) << e.path();
    ++count;
  }
  EXPECT_GE(count, 5u);
}

TEST(ParseConfigTest, DumpReparsesToIdenticalConfig) {
  std::mt19937_64 gen(41);
  const std::vector<std::vector<std::string>> choices = {
      {"model.kind=mlp", "model.kind=logistic-regression"},
      {"model.activation=relu", "model.activation=tanh"},
      {"federation.clients=1", "federation.clients=3", "federation.clients=7"},
      {"federation.aggregation=fedavg", "federation.aggregation=fednova"},
      {"federation.partition=iid", "federation.partition=dirichlet"},
      {"dp.optimizer=sgd", "dp.optimizer=adam"},
      {"dp.sampler=tls", "dp.sampler=poisson"},
      {"dp.noise_placement=after-mean", "dp.noise_placement=before-mean"},
      {"privacy.epsilon=none", "privacy.epsilon=0.7", "privacy.epsilon=2.5"},
      {"mask.layers=all", "mask.layers=head.weight,head.bias"},
      {"comm.encoding=dense-f32", "comm.encoding=sparse-idx32-f32"},
      {"dataset.generator=gaussian-blobs", "dataset.generator=two-spirals"},
      {"dp.learning_rate=0.1", "dp.learning_rate=0.012345678901234567"},
      {"seeds.global=0", "seeds.global=18446744073709551615"},
      {"comm.masked_broadcast=true", "comm.masked_broadcast=false"},
      {"federation.tau_unit=steps", "federation.tau_unit=epochs"},
  };
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::string> overrides;
    for (const auto& options : choices) overrides.push_back(options[gen() % options.size()]);
    if (overrides[0] == "model.kind=logistic-regression") overrides[9] = "mask.layers=all";
    const RunConfig cfg = ParseConfigText(kMinimal, overrides);
    const RunConfig again = ParseConfigText(DumpConfig(cfg));
    EXPECT_TRUE(again == cfg) << DumpConfig(cfg) << "\nvs\n" << DumpConfig(again);
    EXPECT_EQ(DumpConfig(again), DumpConfig(cfg));
  }
}

RunConfig SmallBase() {
  return ParseConfigText(kMinimal, {"federation.local_epochs=1", "dataset.samples=200"});
}

TEST(SweepTest, SingleCellMatchesDirectRun) {
  const RunConfig base = SmallBase();
  const auto rows = RunSweep(base, {{2}, {2}, {1.5}});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].error.empty());
  const TrainTest data = BuildDatasets(base.dataset);
  ExperimentConfig direct = base.experiment;
  direct.rounds = 2;
  direct.target_epsilon = 1.5;
  const auto sel = RunExperiment(direct, data.train, data.test);
  EXPECT_EQ(rows[0].sel_fedavg, sel.records.back().global_accuracy);
  EXPECT_EQ(rows[0].epsilon, sel.records.back().epsilon_to_date);
  direct.mask_layers.clear();
  direct.aggregation = AggregationOp::kFedNova;
  EXPECT_EQ(rows[0].ft_fednova,
            RunExperiment(direct, data.train, data.test).records.back().global_accuracy);
}

TEST(SweepTest, TwoByTwoGridWritesEveryCell) {
  const fs::path dir = fs::temp_directory_path() / "feddp-sweep-grid";
  fs::remove_all(dir);
  const auto rows = RunSweep(SmallBase(), {{2, 5}, {1, 2}, {1.0}}, dir);
  ASSERT_EQ(rows.size(), 4u);
  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& r : rows) {
    EXPECT_TRUE(r.error.empty()) << r.error;
    cells.insert({r.clients, r.rounds});
  }
  EXPECT_EQ(cells.size(), 4u);
  EXPECT_TRUE(fs::exists(dir / "sweep.csv"));
  EXPECT_TRUE(fs::exists(dir / "cell-003" / "Sel-FN" / "rounds.csv"));
  EXPECT_EQ(CollectRuns(dir).size(), 16u);
}

TEST(SweepTest, FailingCellBecomesErrorRow) {
  const auto rows = RunSweep(SmallBase(), {{2, 1000}, {1}, {1.0}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].error.empty());
  EXPECT_FALSE(rows[1].error.empty());
  EXPECT_THROW(RunSweep(SmallBase(), {{}, {1}, {1.0}}), ValidationError);
}

TEST(SweepTest, CellSeedsNeverCollide) {
  const ExperimentConfig base = SmallBase().experiment;
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto c = SweepCellConfig(base, i, 2, 1, 1.0, Variant::kSelFedAvg);
    seeds.insert(c.seeds.global);
    seeds.insert(c.seeds.data);
    seeds.insert(c.seeds.noise);
  }
  EXPECT_EQ(seeds.size(), 3000u);
}

fs::path WriteRun(const fs::path& root, const std::string& name,
                  const std::vector<std::string>& overrides) {
  const RunConfig cfg = ParseConfigText(kMinimal, overrides);
  const TrainTest data = BuildDatasets(cfg.dataset);
  const auto r = RunExperiment(cfg.experiment, data.train, data.test);
  WriteRecords(r.records, root / name,
               {name, r.mask.trainable_count(), r.mask.total_count()});
  return root / name;
}

TEST(ReportTest, OneRunOneRow) {
  const fs::path dir = fs::temp_directory_path() / "feddp-report-one";
  fs::remove_all(dir);
  WriteRun(dir, "only", {});
  const std::string table = RenderReport(dir);
  std::size_t lines = 0;
  for (char c : table) lines += c == '\n';
  EXPECT_EQ(lines, 2u);
  EXPECT_EQ(table.rfind("Model", 0), 0u);
  EXPECT_NE(table.find("only"), std::string::npos);
}

TEST(ReportTest, FourVariantsShowTrafficRatio) {
  const fs::path dir = fs::temp_directory_path() / "feddp-report-four";
  fs::remove_all(dir);
  // Wide input with a one-unit hidden layer: the head is 4 of 1905 weights.
  const std::vector<std::string> wide = {"dataset.input_dim=1900", "dataset.samples=120",
                                         "model.hidden_dim=1", "federation.rounds=1",
                                         "federation.local_epochs=1"};
  auto with = [&](std::vector<std::string> extra) {
    extra.insert(extra.end(), wide.begin(), wide.end());
    return extra;
  };
  WriteRun(dir, "FT", with({"mask.layers=all", "dp.sampler=poisson"}));
  WriteRun(dir, "FTTLS", with({"mask.layers=all", "dp.sampler=tls"}));
  WriteRun(dir, "Sel", with({"dp.sampler=poisson"}));
  WriteRun(dir, "SelTLS", with({"dp.sampler=tls"}));
  const auto rows = CollectRuns(dir);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].run, "FT");
  for (const auto& r : rows) {
    const bool selective = r.run.rfind("Sel", 0) == 0;
    if (selective) {
      EXPECT_NEAR(r.summary.traffic_ratio(), 0.0021, 1e-5);
    } else {
      EXPECT_EQ(r.summary.traffic_ratio(), 1.0);
    }
  }
  const std::string table = RenderReport(dir);
  EXPECT_NE(table.find("0.002100"), std::string::npos) << table;
  EXPECT_NE(table.find("Traffic ratio"), std::string::npos);
}

TEST(ReportTest, EmptyDirectoryIsAnError) {
  const fs::path dir = fs::temp_directory_path() / "feddp-report-empty";
  fs::remove_all(dir);
  fs::create_directories(dir);
  try {
    RenderReport(dir);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("summary.txt"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("rounds.csv"), std::string::npos);
  }
  EXPECT_THROW(RenderReport(dir / "missing"), IoError);
}

}  // namespace
}  // namespace feddp
