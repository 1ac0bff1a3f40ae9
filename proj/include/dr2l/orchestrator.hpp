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

// The closed training loop: the generator proposes scenarios, the agent
// drives them and learns, and boundary-episode returns flow back into the
// generator's range updates.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dr2l/adr_generator.hpp"
#include "dr2l/config.hpp"
#include "dr2l/dqn_agent.hpp"
#include "dr2l/highway_env.hpp"
#include "dr2l/qnet.hpp"

namespace dr2l {

enum class SampleMode { Episode, Boundary };

inline std::string_view to_string(SampleMode m) {
  return m == SampleMode::Episode ? "episode" : "boundary";
}

struct EpisodeResult {
  double cumulative_reward = 0.0;
  double average_speed = 0.0;  // mean ego speed over the episode's steps
  Terminal outcome = Terminal::None;
  std::size_t steps = 0;
  std::vector<double> step_rewards;
  std::size_t train_iterations = 0;
  double loss_sum = 0.0;
  double loss_max = 0.0;
};

/// Randomised parameters -> the nine initial velocities (ego first).
inline ScenarioSample to_scenario(const std::vector<double>& params, const RunConfig& cfg) {
  ScenarioSample s;
  if (cfg.randomize_ego) {
    if (params.size() != kNumVehicles) throw std::invalid_argument("expected 9 parameters");
    std::copy(params.begin(), params.end(), s.initial_velocities.begin());
  } else {
    if (params.size() != kNumNeighbors) throw std::invalid_argument("expected 8 parameters");
    s.initial_velocities[0] = cfg.ego_initial_velocity;
    std::copy(params.begin(), params.end(), s.initial_velocities.begin() + 1);
  }
  return s;
}

/// Drives one episode. `choose(obs)` returns an action index;
/// `after(transition)` sees every transition as it happens.
template <class Choose, class After>
EpisodeResult rollout(const EnvConfig& env, const ScenarioSample& lambda, Choose&& choose,
                      After&& after) {
  const RewardConfig rcfg = reward_config(env);
  WorldState world = build_scenario(lambda, env);
  Observation obs = observe(world, env);
  EpisodeResult res;
  double speed_sum = 0.0;
  while (!world.done()) {
    const std::size_t a = choose(obs);
    auto [next, outcome] = step(world, action_from_index(a), env);
    const double r = reward(next, outcome, rcfg);
    Observation next_obs = observe(next, env);
    after(Transition{obs, a, r, next_obs, outcome.collision || outcome.arrive});
    res.cumulative_reward += r;
    res.step_rewards.push_back(r);
    speed_sum += next.ego().velocity;
    ++res.steps;
    world = next;
    obs = next_obs;
  }
  res.outcome = world.terminal;
  res.average_speed = speed_sum / static_cast<double>(res.steps);
  return res;
}

template <class Choose>
EpisodeResult rollout(const EnvConfig& env, const ScenarioSample& lambda, Choose&& choose) {
  return rollout(env, lambda, std::forward<Choose>(choose), [](const Transition&) {});
}

/// With `training` the agent explores, stores transitions, decays epsilon and
/// trains on schedule; without it the agent acts greedily and is left as is.
inline EpisodeResult run_episode(const EnvConfig& env, DqnAgent& agent, const ScenarioSample& lambda,
                                 bool training) {
  double loss_sum = 0.0, loss_max = 0.0;
  std::size_t iterations = 0;
  auto train_once = [&] {
    const TrainResult tr = agent.train_iteration();
    if (tr.status == TrainStatus::Trained) {
      ++iterations;
      loss_sum += tr.loss;
      loss_max = std::max(loss_max, tr.loss);
    }
  };
  EpisodeResult res = rollout(
      env, lambda, [&](const Observation& obs) { return agent.act(obs, training); },
      [&](const Transition& t) {
        if (!training) return;
        agent.remember(t);
        agent.tick();
        if (agent.config().schedule == TrainSchedule::PerStep) train_once();
      });
  if (training && agent.config().schedule == TrainSchedule::PerEpisode) train_once();
  res.train_iterations = iterations;
  res.loss_sum = loss_sum;
  res.loss_max = loss_max;
  return res;
}

/// One line of the per-episode metrics log.
struct MetricsRecord {
  std::size_t episode = 0;
  SampleMode mode = SampleMode::Episode;
  std::optional<BoundaryId> boundary;
  Terminal outcome = Terminal::None;
  std::size_t steps = 0;
  double cumulative_reward = 0.0;
  double average_speed = 0.0;
  double epsilon = 0.0;  // after the episode
  std::size_t train_iterations = 0;
  double loss_mean = 0.0;
  double loss_max = 0.0;
  std::optional<UpdateAction> update;  // set when a boundary queue reached N this episode
  std::vector<double> lambda;          // the nine initial velocities
  std::vector<double> lower;           // ranges after this episode's update
  std::vector<double> upper;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct Snapshot {
  std::string tag;
  std::size_t episode = 0;  // episodes completed when taken
  NetworkParams weights{};
  std::vector<double> lower;
  std::vector<double> upper;
};

inline Snapshot take_snapshot(const DqnAgent& agent, const DistributionState& gen, std::string tag,
                              std::size_t episode) {
  return {std::move(tag), episode, agent.online(), gen.lower(), gen.upper()};
}

struct TrainingResult {
  DqnAgent agent;
  DistributionState generator;
  std::vector<MetricsRecord> metrics;
  std::vector<Snapshot> snapshots;

  const Snapshot* find_snapshot(std::string_view tag) const {
    for (const auto& s : snapshots)
      if (s.tag == tag) return &s;
    return nullptr;
  }
};

/// Independent deterministic streams derived from the run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

using EpisodeCallback = std::function<void(const MetricsRecord&)>;

/// Milestone snapshots are taken before episode round(f * N) (f = 1 after the
/// last one); a final "dr" snapshot carries the trained agent.
inline TrainingResult run_training(const RunConfig& cfg, const EpisodeCallback& on_episode = {}) {
  cfg.validate();
  TrainingResult out{DqnAgent(cfg.agent, derive_seed(cfg.seed, 2)),
                     DistributionState(cfg.generator), {}, {}};
  DqnAgent& agent = out.agent;
  DistributionState& gen = out.generator;
  std::mt19937_64 gen_rng(derive_seed(cfg.seed, 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t n = cfg.total_episodes;
  auto snapshot_milestones = [&](std::size_t episode) {
    for (std::size_t m = 0; m < cfg.milestones.size(); ++m) {
      const auto at = static_cast<std::size_t>(std::llround(cfg.milestones[m] * static_cast<double>(n)));
      if (at == episode) out.snapshots.push_back(take_snapshot(agent, gen, cfg.milestone_tags[m], episode));
    }
  };

  out.metrics.reserve(n);
  for (std::size_t ep = 0; ep < n; ++ep) {
    snapshot_milestones(ep);

    MetricsRecord rec;
    rec.episode = ep;
    std::vector<double> params;
    if (unit(gen_rng) < cfg.generator.boundary_prob) {
      BoundarySample bs = boundary_sample(gen, gen_rng);
      rec.mode = SampleMode::Boundary;
      rec.boundary = bs.boundary;
      params = std::move(bs.lambda);
    } else {
      params = episode_sample(gen, gen_rng);
    }
    const ScenarioSample lambda = to_scenario(params, cfg);
    const bool training = rec.mode == SampleMode::Episode || cfg.train_on_boundary;

    EpisodeResult res;
    try {
      res = run_episode(cfg.env, agent, lambda, training);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("episode " + std::to_string(ep) + ": " + e.what());
    }

    if (rec.boundary) {
      const BoundaryId b = *rec.boundary;
      auto feed = [&](double p) {
        record_performance(gen, b, p);
        if (auto ev = maybe_update(gen, b)) rec.update = ev->action;
      };
      if (cfg.generator.performance == PerformanceMode::EpisodeReturn) {
        feed(res.cumulative_reward);
      } else {
        for (double r : res.step_rewards) feed(r);
      }
    }

    rec.outcome = res.outcome;
    rec.steps = res.steps;
    rec.cumulative_reward = res.cumulative_reward;
    rec.average_speed = res.average_speed;
    rec.epsilon = agent.epsilon();
    rec.train_iterations = res.train_iterations;
    rec.loss_mean = res.train_iterations ? res.loss_sum / static_cast<double>(res.train_iterations) : 0.0;
    rec.loss_max = res.loss_max;
    rec.lambda.assign(lambda.initial_velocities.begin(), lambda.initial_velocities.end());
    rec.lower = gen.lower();
    rec.upper = gen.upper();
    if (on_episode) on_episode(rec);
    out.metrics.push_back(std::move(rec));
  }
  snapshot_milestones(n);
  out.snapshots.push_back(take_snapshot(agent, gen, "dr", n));
  return out;
}

}  // namespace dr2l
