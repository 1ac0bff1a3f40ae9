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

// Cross-environment evaluation: agents trained on frozen snapshot ranges (and
// the curriculum-trained agent) are each tested greedily on every snapshot
// environment.

#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dr2l/adr_generator.hpp"
#include "dr2l/config.hpp"
#include "dr2l/orchestrator.hpp"
#include "dr2l/qnet.hpp"

namespace dr2l {

struct EnvSnapshot {
  std::string tag;
  std::vector<double> lower;
  std::vector<double> upper;
};

inline EnvSnapshot env_snapshot(const Snapshot& s) { return {s.tag, s.lower, s.upper}; }

/// Plain DQN training on fixed ranges: episode sampling only, no range updates.
inline TrainingResult train_fixed(const EnvSnapshot& env, RunConfig cfg,
                                  const EpisodeCallback& on_episode = {}) {
  cfg.generator.initial_lower = env.lower;
  cfg.generator.initial_upper = env.upper;
  cfg.generator.boundary_prob = 0.0;
  cfg.milestones.clear();
  cfg.milestone_tags.clear();
  return run_training(cfg, on_episode);
}

struct GreedyPolicy {
  const NetworkParams* params;
  std::size_t operator()(const Observation& obs) const { return greedy_action(forward(*params, obs)); }
};

struct ConstantPolicy {
  Action action;
  std::size_t operator()(const Observation&) const { return action_index(action); }
};

struct EvalStats {
  double avg_speed = 0.0;
  double collision_free_rate = 0.0;
  std::size_t episodes = 0;
  std::vector<EpisodeResult> results;
};

/// n episodes with episode-sampled scenarios from `env`, drawn from a stream
/// seeded by `seed` alone so every policy sees the same scenarios.
template <class Policy>
EvalStats evaluate(Policy&& policy, const EnvSnapshot& env, std::size_t n, std::uint64_t seed,
                   const RunConfig& cfg) {
  if (n == 0) throw std::invalid_argument("evaluation needs at least one episode");
  GeneratorConfig g = cfg.generator;
  g.initial_lower = env.lower;
  g.initial_upper = env.upper;
  const DistributionState dist(g);
  std::mt19937_64 rng(seed);
  EvalStats st;
  std::size_t safe = 0;
  double speed = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const ScenarioSample lambda = to_scenario(episode_sample(dist, rng), cfg);
    EpisodeResult r = rollout(cfg.env, lambda, policy);
    speed += r.average_speed;
    if (r.outcome != Terminal::Collided) ++safe;
    st.results.push_back(std::move(r));
  }
  st.episodes = n;
  st.avg_speed = speed / static_cast<double>(n);
  st.collision_free_rate = static_cast<double>(safe) / static_cast<double>(n);
  return st;
}

struct GridCell {
  std::string trained_in;
  std::string tested_in;
  double avg_speed = 0.0;
  double collision_free_rate = 0.0;
  bool collision_free = false;  // rate >= eval.collision_free_threshold
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
};

struct TrainedAgent {
  std::string tag;
  NetworkParams weights;
};

/// Seed shared by every cell tested in environment `test_index`.
inline std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t test_index) {
  return derive_seed(base_seed, 1000 + test_index);
}

inline std::vector<GridCell> build_grid(const std::vector<EnvSnapshot>& test_envs,
                                        const std::vector<TrainedAgent>& agents, std::size_t n,
                                        std::uint64_t base_seed, const RunConfig& cfg) {
  if (test_envs.empty()) throw std::invalid_argument("no test environments");
  if (agents.empty()) throw std::invalid_argument("no agents to evaluate");
  std::vector<GridCell> grid;
  grid.reserve(test_envs.size() * agents.size());
  for (const auto& agent : agents) {
    for (std::size_t t = 0; t < test_envs.size(); ++t) {
      const std::uint64_t seed = cell_seed(base_seed, t);
      const EvalStats st = evaluate(GreedyPolicy{&agent.weights}, test_envs[t], n, seed, cfg);
      grid.push_back({agent.tag, test_envs[t].tag, st.avg_speed, st.collision_free_rate,
                      st.collision_free_rate >= cfg.eval.collision_free_threshold, st.episodes,
                      seed});
    }
  }
  return grid;
}

struct GridRun {
  std::vector<TrainedAgent> agents;  // one per environment snapshot, then "dr"
  std::vector<GridCell> cells;
};

/// Trains a fixed-range agent in each environment snapshot, then evaluates
/// those agents and the domain-randomised one in every environment.
inline GridRun reproduce_grid(const std::vector<Snapshot>& envs, const Snapshot& dr,
                              const RunConfig& cfg) {
  GridRun out;
  std::vector<EnvSnapshot> test_envs;
  for (const auto& s : envs) {
    test_envs.push_back(env_snapshot(s));
    out.agents.push_back({s.tag, train_fixed(test_envs.back(), cfg).agent.online()});
  }
  out.agents.push_back({dr.tag, dr.weights});
  out.cells = build_grid(test_envs, out.agents, cfg.eval.episodes, cfg.seed, cfg);
  return out;
}

inline void write_grid_csv(std::ostream& os, const std::vector<GridCell>& grid) {
  os << "trained_in,tested_in,avg_speed,collision_free_rate,episodes,seed\n";
  for (const auto& c : grid) {
    os << c.trained_in << ',' << c.tested_in << ',' << format_double(c.avg_speed) << ','
       << format_double(c.collision_free_rate) << ',' << c.episodes << ',' << c.seed << '\n';
  }
}

}  // namespace dr2l
