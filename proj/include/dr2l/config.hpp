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

// Run configuration: every tunable of the environment, the agent, the
// generator and the evaluation grid, with a strict JSON mapping. Omitted keys
// keep their defaults; unknown keys are rejected.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dr2l/adr_generator.hpp"
#include "dr2l/dqn_agent.hpp"
#include "dr2l/highway_env.hpp"

namespace dr2l {

struct EvalConfig {
  std::size_t episodes = 100;
  double collision_free_threshold = 0.95;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t total_episodes = 10000;
  // Fractions of total_episodes at which environment snapshots are taken,
  // one tag per fraction.
  std::vector<double> milestones = {0.0, 0.25, 1.0};
  std::vector<std::string> milestone_tags = {"easy", "mid", "hard"};
  bool train_on_boundary = true;
  // When false only the 8 neighbour velocities are randomised and the ego
  // always starts at ego_initial_velocity.
  bool randomize_ego = true;
  double ego_initial_velocity = 10.0;
  double initial_velocity = 10.0;  // default for omitted initial ranges

  EnvConfig env;
  AgentConfig agent;
  GeneratorConfig generator;
  EvalConfig eval;

  std::size_t parameter_count() const { return randomize_ego ? kNumVehicles : kNumNeighbors; }

  /// Fills omitted initial ranges and checks every section.
  void finalize() {
    const std::size_t d = parameter_count();
    if (generator.initial_lower.empty()) generator.initial_lower.assign(d, initial_velocity);
    if (generator.initial_upper.empty()) generator.initial_upper.assign(d, initial_velocity);
    if (generator.initial_lower.size() != d || generator.initial_upper.size() != d) {
      throw std::invalid_argument("generator initial ranges need " + std::to_string(d) +
                                  " entries");
    }
    validate();
  }

  void validate() const {
    const RewardCheck check = validate_reward_config(reward_config(env));
    if (!check.ok) throw std::invalid_argument("reward design infeasible: " + check.message());
    if (!(env.dt > 0.0)) throw std::invalid_argument("env.dt must be positive");
    if (!(env.t_max > 0.0)) throw std::invalid_argument("env.t_max must be positive");
    if (!(env.car_length > 0.0)) throw std::invalid_argument("env.car_length must be positive");
    if (!(env.distance_clip > 0.0)) throw std::invalid_argument("env.distance_clip must be positive");
    if (!(env.min_velocity <= env.max_velocity)) {
      throw std::invalid_argument("env.min_velocity exceeds env.max_velocity");
    }
    if (!(ego_initial_velocity >= env.min_velocity && ego_initial_velocity <= env.max_velocity)) {
      throw std::invalid_argument("ego_initial_velocity outside the velocity clamp");
    }
    agent.validate();
    generator.validate();
    if (generator.dimension() != parameter_count()) {
      throw std::invalid_argument("generator dimension does not match randomize_ego");
    }
    if (generator.min_value < env.min_velocity || generator.max_value > env.max_velocity) {
      throw std::invalid_argument("generator clamps exceed the admissible velocity range");
    }
    if (milestones.size() != milestone_tags.size()) {
      throw std::invalid_argument("milestones and milestone_tags differ in length");
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < milestones.size(); ++i) {
      if (!(milestones[i] >= 0.0 && milestones[i] <= 1.0)) {
        throw std::invalid_argument("milestones must be fractions in [0, 1]");
      }
      if (milestone_tags[i].empty() || milestone_tags[i] == "dr" ||
          !seen.insert(milestone_tags[i]).second) {
        throw std::invalid_argument("milestone tags must be unique, non-empty and not 'dr'");
      }
    }
    if (eval.episodes == 0) throw std::invalid_argument("eval.episodes must be positive");
    if (!(eval.collision_free_threshold >= 0.0 && eval.collision_free_threshold <= 1.0)) {
      throw std::invalid_argument("eval.collision_free_threshold must lie in [0, 1]");
    }
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw std::invalid_argument("unknown config key '" + where + key + "'");
  }
}

template <class T>
void read_key(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("config key '" + where + key + "': " + e.what());
  }
}

/// Accepts a list or a single number applied to all `d` parameters.
inline void read_velocity_range(const json& obj, const char* key, std::vector<double>& out,
                                std::size_t d, const std::string& where) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_number()) {
    out.assign(d, obj.at(key).get<double>());
    return;
  }
  read_key(obj, key, out, where);
}

}  // namespace detail

inline std::string to_string(TrainSchedule s) {
  return s == TrainSchedule::PerStep ? "step" : "episode";
}

inline std::string to_string(PerformanceMode m) {
  return m == PerformanceMode::EpisodeReturn ? "episode_return" : "step_reward";
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::read_key;
  RunConfig c;
  detail::reject_unknown(j, "",
                         {"seed", "total_episodes", "milestones", "milestone_tags",
                          "train_on_boundary", "randomize_ego", "ego_initial_velocity",
                          "initial_velocity", "env", "agent", "generator", "eval"});
  read_key(j, "seed", c.seed, "");
  read_key(j, "total_episodes", c.total_episodes, "");
  read_key(j, "milestones", c.milestones, "");
  read_key(j, "milestone_tags", c.milestone_tags, "");
  read_key(j, "train_on_boundary", c.train_on_boundary, "");
  read_key(j, "randomize_ego", c.randomize_ego, "");
  read_key(j, "ego_initial_velocity", c.ego_initial_velocity, "");
  read_key(j, "initial_velocity", c.initial_velocity, "");

  if (j.contains("env")) {
    const auto& e = j.at("env");
    const std::string w = "env.";
    detail::reject_unknown(e, w,
                           {"v_max", "distance", "dt", "acceleration", "car_length", "t_max",
                            "distance_clip", "min_velocity", "max_velocity", "r_arrive",
                            "r_collision"});
    read_key(e, "v_max", c.env.v_max, w);
    read_key(e, "distance", c.env.distance, w);
    read_key(e, "dt", c.env.dt, w);
    read_key(e, "acceleration", c.env.acceleration, w);
    read_key(e, "car_length", c.env.car_length, w);
    read_key(e, "t_max", c.env.t_max, w);
    read_key(e, "distance_clip", c.env.distance_clip, w);
    read_key(e, "min_velocity", c.env.min_velocity, w);
    read_key(e, "max_velocity", c.env.max_velocity, w);
    read_key(e, "r_arrive", c.env.r_arrive, w);
    read_key(e, "r_collision", c.env.r_collision, w);
  }
  if (j.contains("agent")) {
    const auto& a = j.at("agent");
    const std::string w = "agent.";
    detail::reject_unknown(a, w,
                           {"gamma", "learning_rate", "epsilon_start", "epsilon_min",
                            "epsilon_decay", "batch_size", "memory_size", "sync_every",
                            "grad_clip", "train_schedule"});
    read_key(a, "gamma", c.agent.gamma, w);
    read_key(a, "learning_rate", c.agent.learning_rate, w);
    read_key(a, "epsilon_start", c.agent.epsilon_start, w);
    read_key(a, "epsilon_min", c.agent.epsilon_min, w);
    read_key(a, "epsilon_decay", c.agent.epsilon_decay, w);
    read_key(a, "batch_size", c.agent.batch_size, w);
    read_key(a, "memory_size", c.agent.memory_size, w);
    read_key(a, "sync_every", c.agent.sync_every, w);
    read_key(a, "grad_clip", c.agent.grad_clip, w);
    if (a.contains("train_schedule")) {
      std::string s;
      read_key(a, "train_schedule", s, w);
      if (s == "step") c.agent.schedule = TrainSchedule::PerStep;
      else if (s == "episode") c.agent.schedule = TrainSchedule::PerEpisode;
      else throw std::invalid_argument("agent.train_schedule must be 'step' or 'episode'");
    }
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    const std::string w = "generator.";
    detail::reject_unknown(g, w,
                           {"boundary_prob", "step", "increase_threshold", "decrease_threshold",
                            "queue_size", "min_value", "max_value", "initial_lower",
                            "initial_upper", "performance"});
    read_key(g, "boundary_prob", c.generator.boundary_prob, w);
    read_key(g, "step", c.generator.step, w);
    read_key(g, "increase_threshold", c.generator.increase_threshold, w);
    read_key(g, "decrease_threshold", c.generator.decrease_threshold, w);
    read_key(g, "queue_size", c.generator.queue_size, w);
    read_key(g, "min_value", c.generator.min_value, w);
    read_key(g, "max_value", c.generator.max_value, w);
    detail::read_velocity_range(g, "initial_lower", c.generator.initial_lower, c.parameter_count(), w);
    detail::read_velocity_range(g, "initial_upper", c.generator.initial_upper, c.parameter_count(), w);
    if (g.contains("performance")) {
      std::string s;
      read_key(g, "performance", s, w);
      if (s == "episode_return") c.generator.performance = PerformanceMode::EpisodeReturn;
      else if (s == "step_reward") c.generator.performance = PerformanceMode::StepReward;
      else throw std::invalid_argument("generator.performance must be 'episode_return' or 'step_reward'");
    }
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    const std::string w = "eval.";
    detail::reject_unknown(e, w, {"episodes", "collision_free_threshold"});
    read_key(e, "episodes", c.eval.episodes, w);
    read_key(e, "collision_free_threshold", c.eval.collision_free_threshold, w);
  }
  c.finalize();
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

/// Fully resolved document; parsing it back yields the same configuration.
inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["total_episodes"] = c.total_episodes;
  j["milestones"] = c.milestones;
  j["milestone_tags"] = c.milestone_tags;
  j["train_on_boundary"] = c.train_on_boundary;
  j["randomize_ego"] = c.randomize_ego;
  j["ego_initial_velocity"] = c.ego_initial_velocity;
  j["initial_velocity"] = c.initial_velocity;
  j["env"] = {{"v_max", c.env.v_max},
              {"distance", c.env.distance},
              {"dt", c.env.dt},
              {"acceleration", c.env.acceleration},
              {"car_length", c.env.car_length},
              {"t_max", c.env.t_max},
              {"distance_clip", c.env.distance_clip},
              {"min_velocity", c.env.min_velocity},
              {"max_velocity", c.env.max_velocity},
              {"r_arrive", c.env.r_arrive},
              {"r_collision", c.env.r_collision}};
  j["agent"] = {{"gamma", c.agent.gamma},
                {"learning_rate", c.agent.learning_rate},
                {"epsilon_start", c.agent.epsilon_start},
                {"epsilon_min", c.agent.epsilon_min},
                {"epsilon_decay", c.agent.epsilon_decay},
                {"batch_size", c.agent.batch_size},
                {"memory_size", c.agent.memory_size},
                {"sync_every", c.agent.sync_every},
                {"grad_clip", c.agent.grad_clip},
                {"train_schedule", to_string(c.agent.schedule)}};
  j["generator"] = {{"boundary_prob", c.generator.boundary_prob},
                    {"step", c.generator.step},
                    {"increase_threshold", c.generator.increase_threshold},
                    {"decrease_threshold", c.generator.decrease_threshold},
                    {"queue_size", c.generator.queue_size},
                    {"min_value", c.generator.min_value},
                    {"max_value", c.generator.max_value},
                    {"initial_lower", c.generator.initial_lower},
                    {"initial_upper", c.generator.initial_upper},
                    {"performance", to_string(c.generator.performance)}};
  j["eval"] = {{"episodes", c.eval.episodes},
               {"collision_free_threshold", c.eval.collision_free_threshold}};
  return j;
}

}  // namespace dr2l
