// Copyright 2026 The dr2l Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// dr2l: train, evaluate and export adaptive domain randomisation runs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dr2l/dr2l.hpp"

namespace fs = std::filesystem;
using namespace dr2l;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string run_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  std::vector<std::string> snapshot_tags;
  bool force = false;
};

RunConfig resolve_config(const Options& o, const std::string& fallback = {}) {
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config);
  } else if (!fallback.empty() && fs::exists(fallback)) {
    cfg = load_config(fallback);
  } else {
    cfg.finalize();
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.episodes) cfg.total_episodes = *o.episodes;
  cfg.validate();
  return cfg;
}

int cmd_validate(const Options& o) {
  if (o.config.empty()) throw std::invalid_argument("validate-config needs --config");
  const RunConfig cfg = resolve_config(o);
  const RewardCheck check = validate_reward_config(reward_config(cfg.env));
  std::cout << "config ok: " << check.message() << "\n" << config_to_json(cfg).dump(2) << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  if (o.out.empty()) throw std::invalid_argument("train needs --out");
  const RunConfig cfg = resolve_config(o);
  prepare_output_dir(o.out, o.force);
  const std::size_t n = cfg.total_episodes;
  const std::size_t every = std::max<std::size_t>(1, n / 20);
  double window = 0.0;
  std::size_t in_window = 0;
  const TrainingResult res = run_training(cfg, [&](const MetricsRecord& r) {
    window += r.cumulative_reward;
    ++in_window;
    if ((r.episode + 1) % every == 0 || r.episode + 1 == n) {
      std::fprintf(stderr, "episode %zu/%zu  mean return %.3f  epsilon %.3f\n", r.episode + 1, n,
                   window / static_cast<double>(in_window), r.epsilon);
      window = 0.0;
      in_window = 0;
    }
  });
  write_run(o.out, cfg, res);
  std::cout << "wrote " << res.metrics.size() << " episodes and " << res.snapshots.size()
            << " snapshots to " << o.out << "\n";
  return 0;
}

void print_grid(const std::vector<GridCell>& cells, const std::vector<std::string>& envs) {
  std::printf("%-10s", "trained");
  for (const auto& e : envs) std::printf("  %-22s", e.c_str());
  std::printf("\n");
  std::string row;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i % envs.size() == 0) std::printf("%-10s", cells[i].trained_in.c_str());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%6.2f m/s %5.2f %-3s", cells[i].avg_speed, cells[i].collision_free_rate,
                  cells[i].collision_free ? "ok" : "x");
    std::printf("  %-22s", buf);
    if (i % envs.size() + 1 == envs.size()) std::printf("\n");
  }
}

int cmd_grid(const Options& o) {
  const fs::path run(o.run_dir);
  const RunConfig cfg = resolve_config(o, (run / kConfigFile).string());
  const std::vector<std::string> tags =
      o.snapshot_tags.empty() ? cfg.milestone_tags : o.snapshot_tags;
  if (tags.empty()) throw std::invalid_argument("no environment snapshot tags");
  const fs::path snaps = run / kSnapshotDir;
  std::vector<std::string> all = tags;
  all.push_back("dr");
  for (const auto& t : all) {
    if (!fs::is_directory(snaps / t)) throw std::runtime_error("missing snapshot '" + t + "' in " + snaps.string());
  }
  std::vector<Snapshot> envs;
  for (const auto& t : tags) envs.push_back(load_snapshot(snaps, t));
  const Snapshot dr = load_snapshot(snaps, "dr");

  const fs::path out = o.out.empty() ? run : fs::path(o.out);
  fs::create_directories(out);
  const fs::path csv = out / kGridFile;
  if (fs::exists(csv) && !o.force) {
    throw std::runtime_error(csv.string() + " exists (use --force to overwrite)");
  }
  const GridRun g = reproduce_grid(envs, dr, cfg);
  auto os = open_out(csv);
  write_grid_csv(os, g.cells);
  if (!os) throw std::runtime_error("failed writing " + csv.string());
  print_grid(g.cells, tags);
  std::cout << "wrote " << csv.string() << "\n";
  return 0;
}

int cmd_export(const Options& o) {
  const fs::path run(o.run_dir);
  const fs::path out = o.out.empty() ? run / "export" : fs::path(o.out);
  const std::size_t n = export_run(run, out);
  std::cout << "exported " << n << " episodes to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive domain randomisation for a highway lane-change DQN agent"};
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate-config", "Check a config file and print it with defaults applied");
  validate->add_option("--config", o.config, "Config file (JSON)")->required();

  auto* train = app.add_subcommand("train", "Run domain-randomised training and write a run directory");
  train->add_option("--config", o.config, "Config file (JSON); defaults when omitted");
  train->add_option("--out", o.out, "Run directory")->required();
  train->add_option("--seed", o.seed, "Override the run seed");
  train->add_option("--episodes", o.episodes, "Override total_episodes");
  train->add_flag("--force", o.force, "Replace a non-empty run directory");

  auto* grid = app.add_subcommand("grid", "Train fixed-range agents on snapshot environments and evaluate all agents");
  grid->add_option("run", o.run_dir, "Run directory holding snapshots/")->required();
  grid->add_option("--config", o.config, "Config file; defaults to the run's config.json");
  grid->add_option("--out", o.out, "Where grid.csv goes; defaults to the run directory");
  grid->add_option("--seed", o.seed, "Override the seed for fixed-range training and evaluation");
  grid->add_option("--episodes", o.episodes, "Training episodes per fixed-range agent");
  grid->add_option("--snapshot-tags", o.snapshot_tags, "Environment snapshot tags")->delimiter(',');
  grid->add_flag("--force", o.force, "Overwrite an existing grid.csv");

  auto* exp = app.add_subcommand("export", "Re-emit bounds trace and sample CSVs from a run's metrics log");
  exp->add_option("run", o.run_dir, "Run directory")->required();
  exp->add_option("--out", o.out, "Output directory; defaults to <run>/export");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*validate) return cmd_validate(o);
    if (*train) return cmd_train(o);
    if (*grid) return cmd_grid(o);
    if (*exp) return cmd_export(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
