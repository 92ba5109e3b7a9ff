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

// Command-line entry point.
//
//   feddp centralized --config FILE [--set key=value]... [--out DIR] [--seed N]
//   feddp federated   --config FILE [--set key=value]... [--out DIR] [--seed N]
//   feddp accountant  --q Q (--sigma S | --epsilon E) --epochs N [--rounds R] [--delta D]
//   feddp sweep       --config FILE --clients 2,5 --rounds 10,20 --epsilons 1.33
//   feddp report      DIR
//
// Exit codes: 0 success, 2 invalid input, 3 runtime failure, 4 I/O failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "feddp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

constexpr const char* kOutputRootEnv = "FEDDP_OUTPUT_ROOT";

int ExitCodeFor(const feddp::Error& e) {
  switch (e.kind()) {
    case feddp::ErrorKind::kValidation:
    case feddp::ErrorKind::kDomain:
      return kExitValidation;
    case feddp::ErrorKind::kIo:
      return kExitIo;
    default:
      return kExitRuntime;
  }
}

std::filesystem::path RunDirectory(const std::string& out_flag,
                                   const std::string& subcommand,
                                   std::uint64_t seed) {
  std::filesystem::path root = out_flag;
  if (root.empty()) {
    const char* env = std::getenv(kOutputRootEnv);
    root = env != nullptr && *env != '\0' ? env : "runs";
  }
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);
  return root / (subcommand + "-" + stamp + "-seed" + std::to_string(seed));
}

struct RunFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void AddRunFlags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config, "experiment configuration file")
      ->required();
  cmd->add_option("--set", flags.overrides, "override, key=value (repeatable)");
  cmd->add_option("--out", flags.out,
                  std::string("output root (default $") + kOutputRootEnv +
                      " or ./runs)");
  cmd->add_option("--seed", flags.seed, "global seed override");
}

feddp::RunConfig LoadConfig(const RunFlags& flags) {
  std::vector<std::string> overrides = flags.overrides;
  if (flags.seed) overrides.push_back("seeds.global=" + std::to_string(*flags.seed));
  return feddp::ParseConfigFile(flags.config, overrides);
}

int RunTraining(const RunFlags& flags, bool centralized) {
  const feddp::RunConfig cfg = LoadConfig(flags);
  const feddp::TrainTest data = feddp::BuildDatasets(cfg.dataset);
  const std::string sub = centralized ? "centralized" : "federated";
  const auto dir = RunDirectory(flags.out, sub, cfg.experiment.seeds.global);
  std::filesystem::create_directories(dir);
  feddp::WriteTextFile(dir / "config.resolved", feddp::DumpConfig(cfg));

  const feddp::ExperimentResult result =
      centralized ? feddp::RunCentralized(cfg.experiment, data.train, data.test)
                  : feddp::RunExperiment(cfg.experiment, data.train, data.test);
  const feddp::RunSummary summary = feddp::WriteRecords(
      result.records, dir,
      {cfg.experiment.label.empty() ? sub : cfg.experiment.label,
       result.mask.trainable_count(), result.mask.total_count()});
  feddp::WriteModelFile(result.final_params, dir / feddp::kModelFile);

  std::cout << feddp::DumpConfig(cfg) << "output_dir=" << dir.string() << "\n"
            << feddp::RenderSummary(summary);
  if (result.error) {
    feddp::WriteTextFile(dir / "error.txt", *result.error + "\n");
    std::cerr << "run aborted: " << *result.error << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

std::vector<double> ParseRealList(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : feddp::config_detail::SplitList(s)) {
    out.push_back(feddp::config_detail::ToReal("list", item));
  }
  return out;
}

std::vector<std::size_t> ParseSizeList(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : feddp::config_detail::SplitList(s)) {
    out.push_back(feddp::config_detail::ToSize("list", item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated DP training simulator with selective tuning"};
  app.require_subcommand(1);

  RunFlags central_flags;
  auto* central = app.add_subcommand("centralized", "single-party DP training");
  AddRunFlags(central, central_flags);

  RunFlags fed_flags;
  auto* fed = app.add_subcommand("federated", "federated DP training");
  AddRunFlags(fed, fed_flags);

  double q = 0.0;
  std::optional<double> sigma;
  std::optional<double> target;
  std::size_t epochs = 0;
  std::size_t rounds = 1;
  double delta = feddp::kDefaultDelta;
  auto* acc = app.add_subcommand("accountant", "privacy accounting");
  acc->add_option("--q", q, "sampling ratio B/N")->required();
  auto* sigma_opt = acc->add_option("--sigma", sigma, "noise multiplier");
  auto* eps_opt = acc->add_option("--epsilon", target, "target epsilon");
  sigma_opt->excludes(eps_opt);
  acc->add_option("--epochs", epochs, "local epochs per round")->required();
  acc->add_option("--rounds", rounds, "rounds of participation");
  acc->add_option("--delta", delta, "failure probability");

  RunFlags sweep_flags;
  std::string grid_clients;
  std::string grid_rounds;
  std::string grid_eps;
  auto* sweep = app.add_subcommand("sweep", "clients x rounds x epsilon grid");
  AddRunFlags(sweep, sweep_flags);
  sweep->add_option("--clients", grid_clients, "comma-separated")->required();
  sweep->add_option("--rounds", grid_rounds, "comma-separated")->required();
  sweep->add_option("--epsilons", grid_eps, "comma-separated")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "tabulate finished runs");
  report->add_option("dir", report_dir, "directory holding run outputs")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*central) return RunTraining(central_flags, true);
    if (*fed) return RunTraining(fed_flags, false);
    if (*acc) {
      if (!sigma && !target) {
        std::cerr << "accountant: one of --sigma or --epsilon is required\n";
        return kExitValidation;
      }
      feddp::PrivacyParams p;
      p.q = q;
      p.epochs = epochs;
      p.delta = delta;
      p.sigma = sigma ? *sigma
                      : feddp::SigmaForTarget(q, rounds * epochs, delta, *target);
      const feddp::PrivacyReport r = feddp::ComposeRounds(p, rounds);
      std::cout << "formula=" << r.formula << "\n"
                << "q=" << feddp::FormatReal(p.q) << "\n"
                << "sigma=" << feddp::FormatReal(p.sigma) << "\n"
                << "per_round_epochs=" << r.per_round_epochs << "\n"
                << "rounds=" << r.rounds << "\n"
                << "total_epochs=" << r.rounds * r.per_round_epochs << "\n"
                << "delta=" << feddp::FormatReal(r.delta) << "\n"
                << "epsilon=" << feddp::FormatReal(r.epsilon) << "\n";
      return kExitOk;
    }
    if (*sweep) {
      const feddp::RunConfig cfg = LoadConfig(sweep_flags);
      const feddp::SweepGrid grid{ParseSizeList(grid_clients),
                                  ParseSizeList(grid_rounds),
                                  ParseRealList(grid_eps)};
      const auto dir =
          RunDirectory(sweep_flags.out, "sweep", cfg.experiment.seeds.global);
      const auto rows = feddp::RunSweep(cfg, grid, dir);
      std::cout << feddp::RenderSweepCsv(rows) << "output_dir=" << dir.string()
                << "\n";
      for (const auto& r : rows) {
        if (!r.error.empty()) return kExitRuntime;
      }
      return kExitOk;
    }
    if (*report) {
      std::cout << feddp::RenderReport(report_dir);
      return kExitOk;
    }
  } catch (const feddp::Error& e) {
    std::cerr << e.what() << "\n";
    return ExitCodeFor(e);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
