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

// Run directory layout and file formats.
//
//   <run>/config.json              resolved configuration (defaults applied)
//   <run>/metrics.jsonl            one JSON object per episode
//   <run>/bounds_trace.csv         episode_index,param_index,lower,upper
//   <run>/samples.csv              episode_index,lambda_0..lambda_8
//   <run>/snapshots/<tag>/weights.txt   network snapshot (see qnet.hpp)
//   <run>/snapshots/<tag>/bounds.csv    param_index,lower,upper
//   <run>/grid.csv                 written by the grid command

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dr2l/config.hpp"
#include "dr2l/orchestrator.hpp"
#include "dr2l/qnet.hpp"

namespace dr2l {

namespace fs = std::filesystem;

inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kMetricsFile = "metrics.jsonl";
inline constexpr const char* kBoundsTraceFile = "bounds_trace.csv";
inline constexpr const char* kSamplesFile = "samples.csv";
inline constexpr const char* kSnapshotDir = "snapshots";
inline constexpr const char* kWeightsFile = "weights.txt";
inline constexpr const char* kBoundsFile = "bounds.csv";
inline constexpr const char* kGridFile = "grid.csv";

inline nlohmann::json to_json(const MetricsRecord& r) {
  nlohmann::json j;
  j["episode"] = r.episode;
  j["mode"] = std::string(to_string(r.mode));
  if (r.boundary) {
    j["boundary_param"] = r.boundary->param;
    j["boundary_side"] = std::string(to_string(r.boundary->side));
  } else {
    j["boundary_param"] = nullptr;
    j["boundary_side"] = nullptr;
  }
  j["outcome"] = std::string(to_string(r.outcome));
  j["steps"] = r.steps;
  j["cumulative_reward"] = r.cumulative_reward;
  j["average_speed"] = r.average_speed;
  j["epsilon"] = r.epsilon;
  j["train_iterations"] = r.train_iterations;
  j["loss_mean"] = r.loss_mean;
  j["loss_max"] = r.loss_max;
  j["update"] = r.update ? nlohmann::json(std::string(to_string(*r.update))) : nlohmann::json(nullptr);
  j["lambda"] = r.lambda;
  j["lower"] = r.lower;
  j["upper"] = r.upper;
  return j;
}

inline MetricsRecord metrics_from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.episode = j.at("episode").get<std::size_t>();
  r.mode = j.at("mode").get<std::string>() == "boundary" ? SampleMode::Boundary : SampleMode::Episode;
  if (!j.at("boundary_param").is_null()) {
    r.boundary = BoundaryId{j.at("boundary_param").get<std::size_t>(),
                            side_from_string(j.at("boundary_side").get<std::string>())};
  }
  r.outcome = terminal_from_string(j.at("outcome").get<std::string>());
  r.steps = j.at("steps").get<std::size_t>();
  r.cumulative_reward = j.at("cumulative_reward").get<double>();
  r.average_speed = j.at("average_speed").get<double>();
  r.epsilon = j.at("epsilon").get<double>();
  r.train_iterations = j.at("train_iterations").get<std::size_t>();
  r.loss_mean = j.at("loss_mean").get<double>();
  r.loss_max = j.at("loss_max").get<double>();
  if (!j.at("update").is_null()) {
    const auto u = j.at("update").get<std::string>();
    r.update = u == "expanded" ? UpdateAction::Expanded
             : u == "contracted" ? UpdateAction::Contracted
                                 : UpdateAction::None;
  }
  r.lambda = j.at("lambda").get<std::vector<double>>();
  r.lower = j.at("lower").get<std::vector<double>>();
  r.upper = j.at("upper").get<std::vector<double>>();
  return r;
}

inline void write_metrics_line(std::ostream& os, const MetricsRecord& r) { os << to_json(r).dump() << '\n'; }

inline std::vector<MetricsRecord> read_metrics(std::istream& is) {
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(metrics_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("metrics line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_bounds_trace_header(std::ostream& os) { os << "episode_index,param_index,lower,upper\n"; }

inline void write_bounds_trace_rows(std::ostream& os, const MetricsRecord& r) {
  for (std::size_t i = 0; i < r.lower.size(); ++i) {
    os << r.episode << ',' << i << ',' << format_double(r.lower[i]) << ',' << format_double(r.upper[i])
       << '\n';
  }
}

inline void write_samples_header(std::ostream& os) {
  os << "episode_index";
  for (std::size_t i = 0; i < kNumVehicles; ++i) os << ",lambda_" << i;
  os << '\n';
}

inline void write_samples_row(std::ostream& os, const MetricsRecord& r) {
  os << r.episode;
  for (double v : r.lambda) os << ',' << format_double(v);
  os << '\n';
}

/// Refuses to reuse a non-empty directory unless `force`.
inline void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) {
        throw std::runtime_error("output directory " + dir.string() +
                                 " is not empty (use --force to overwrite)");
      }
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
  return os;
}

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot open " + p.string());
  return is;
}

inline void write_bounds_csv(std::ostream& os, const std::vector<double>& lower,
                             const std::vector<double>& upper) {
  os << "param_index,lower,upper\n";
  for (std::size_t i = 0; i < lower.size(); ++i) {
    os << i << ',' << format_double(lower[i]) << ',' << format_double(upper[i]) << '\n';
  }
}

inline void read_bounds_csv(std::istream& is, std::vector<double>& lower, std::vector<double>& upper) {
  std::string line;
  if (!std::getline(is, line) || line != "param_index,lower,upper") {
    throw std::runtime_error("bounds file: bad header");
  }
  lower.clear();
  upper.clear();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string idx, lo, hi;
    if (!std::getline(row, idx, ',') || !std::getline(row, lo, ',') || !std::getline(row, hi)) {
      throw std::runtime_error("bounds file: malformed row '" + line + "'");
    }
    if (std::stoul(idx) != lower.size()) throw std::runtime_error("bounds file: rows out of order");
    lower.push_back(parse_double(lo));
    upper.push_back(parse_double(hi));
  }
}

inline void save_snapshot(const fs::path& snapshots_dir, const Snapshot& s) {
  const fs::path dir = snapshots_dir / s.tag;
  fs::create_directories(dir);
  auto w = open_out(dir / kWeightsFile);
  write_snapshot(w, s.weights);
  auto b = open_out(dir / kBoundsFile);
  write_bounds_csv(b, s.lower, s.upper);
  if (!w || !b) throw std::runtime_error("failed writing snapshot " + s.tag);
}

inline Snapshot load_snapshot(const fs::path& snapshots_dir, const std::string& tag) {
  const fs::path dir = snapshots_dir / tag;
  if (!fs::is_directory(dir)) throw std::runtime_error("missing snapshot '" + tag + "' in " + snapshots_dir.string());
  Snapshot s;
  s.tag = tag;
  auto w = open_in(dir / kWeightsFile);
  s.weights = read_snapshot(w);
  auto b = open_in(dir / kBoundsFile);
  read_bounds_csv(b, s.lower, s.upper);
  return s;
}

inline void write_config(const fs::path& p, const RunConfig& cfg) {
  auto os = open_out(p);
  os << config_to_json(cfg).dump(2) << '\n';
}

inline RunConfig load_config(const fs::path& p) {
  auto is = open_in(p);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

/// Writes every product of a finished run into `dir` (which must exist).
inline void write_run(const fs::path& dir, const RunConfig& cfg, const TrainingResult& res) {
  write_config(dir / kConfigFile, cfg);
  auto metrics = open_out(dir / kMetricsFile);
  auto trace = open_out(dir / kBoundsTraceFile);
  auto samples = open_out(dir / kSamplesFile);
  write_bounds_trace_header(trace);
  write_samples_header(samples);
  for (const auto& r : res.metrics) {
    write_metrics_line(metrics, r);
    write_bounds_trace_rows(trace, r);
    write_samples_row(samples, r);
  }
  if (!metrics || !trace || !samples) throw std::runtime_error("failed writing run logs in " + dir.string());
  for (const auto& s : res.snapshots) save_snapshot(dir / kSnapshotDir, s);
}

/// Re-derives the bounds trace and sample CSVs from a run's metrics log.
inline std::size_t export_run(const fs::path& run_dir, const fs::path& out_dir) {
  const fs::path metrics_path = run_dir / kMetricsFile;
  if (!fs::exists(metrics_path)) throw std::runtime_error("missing " + metrics_path.string());
  auto is = open_in(metrics_path);
  const auto records = read_metrics(is);
  fs::create_directories(out_dir);
  auto trace = open_out(out_dir / kBoundsTraceFile);
  auto samples = open_out(out_dir / kSamplesFile);
  write_bounds_trace_header(trace);
  write_samples_header(samples);
  for (const auto& r : records) {
    write_bounds_trace_rows(trace, r);
    write_samples_row(samples, r);
  }
  if (!trace || !samples) throw std::runtime_error("failed writing export in " + out_dir.string());
  return records.size();
}

}  // namespace dr2l
