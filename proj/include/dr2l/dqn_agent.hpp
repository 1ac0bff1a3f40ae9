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

// DQN training machinery: epsilon-greedy selection with a linear decay,
// a ring-buffer replay pool, TD targets from a frozen target network and
// periodic target synchronisation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "dr2l/highway_env.hpp"
#include "dr2l/qnet.hpp"

namespace dr2l {

struct Transition {
  Observation obs{};
  std::size_t action = 0;
  double reward = 0.0;
  Observation next_obs{};
  bool terminal = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

enum class TrainSchedule { PerStep, PerEpisode };

struct AgentConfig {
  double gamma = 0.9;
  double learning_rate = 0.001;
  double epsilon_start = 0.9;
  double epsilon_min = 0.1;
  double epsilon_decay = 4e-6;  // per environment step
  std::size_t batch_size = 32;
  std::size_t memory_size = 2000;
  std::size_t sync_every = 5000;  // training iterations
  double grad_clip = 0.0;         // elementwise bound; <= 0 disables
  TrainSchedule schedule = TrainSchedule::PerStep;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (!(epsilon_min >= 0.0 && epsilon_min <= epsilon_start && epsilon_start <= 1.0)) {
      throw std::invalid_argument("need 0 <= epsilon_min <= epsilon_start <= 1");
    }
    if (!(epsilon_decay >= 0.0)) throw std::invalid_argument("epsilon_decay must be >= 0");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (memory_size < batch_size) throw std::invalid_argument("memory_size must be >= batch_size");
    if (sync_every == 0) throw std::invalid_argument("sync_every must be positive");
  }
};

/// Fixed-capacity ring buffer. Index 0 is always the oldest stored item.
class ReplayPool {
 public:
  explicit ReplayPool(std::size_t capacity = 2000) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    items_.reserve(capacity);
  }

  void push(const Transition& t) {
    if (items_.size() < capacity_) {
      items_.push_back(t);
    } else {
      items_[cursor_] = t;
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  const Transition& operator[](std::size_t i) const {
    if (i >= items_.size()) throw std::out_of_range("replay index out of range");
    if (items_.size() < capacity_) return items_[i];
    return items_[(cursor_ + i) % capacity_];
  }

  /// Uniform with replacement.
  template <class Rng>
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("sampling from an empty replay pool");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = pick(rng);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> items_;
};

/// Argmax with ties going to the lowest index.
template <std::size_t N>
std::size_t greedy_action(const std::array<double, N>& q) {
  return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

template <std::size_t N, class Rng>
std::size_t select_action(const std::array<double, N>& q, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon outside [0, 1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<std::size_t> pick(0, N - 1);
      return pick(rng);
    }
  }
  return greedy_action(q);
}

inline double decay_epsilon(double epsilon, const AgentConfig& cfg = {}) {
  return std::max(cfg.epsilon_min, epsilon - cfg.epsilon_decay);
}

/// Closed form of `steps` applications of decay_epsilon from epsilon_start.
/// Computed from the count so the floor is hit at exactly (start - min) / decay.
inline double epsilon_after(std::uint64_t steps, const AgentConfig& cfg = {}) {
  if (cfg.epsilon_decay <= 0.0) return cfg.epsilon_start;
  // floor step rounded to the nearest integer so 0.8 / 4e-6 lands on 200000
  const double floor_step = std::round((cfg.epsilon_start - cfg.epsilon_min) / cfg.epsilon_decay);
  if (static_cast<double>(steps) >= floor_step) return cfg.epsilon_min;
  return std::max(cfg.epsilon_min,
                  cfg.epsilon_start - static_cast<double>(steps) * cfg.epsilon_decay);
}

inline double td_target(const Transition& t, const NetworkParams& target_params, double gamma) {
  if (t.terminal) return t.reward;
  const auto q_next = forward(target_params, t.next_obs);
  return t.reward + gamma * *std::max_element(q_next.begin(), q_next.end());
}

inline std::vector<double> td_targets(std::span<const Transition> batch,
                                      const NetworkParams& target_params, double gamma) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& t : batch) out.push_back(td_target(t, target_params, gamma));
  return out;
}

/// Mean squared TD error over the batch and one clipped gradient step.
struct BatchUpdate {
  NetworkParams params;
  double loss = 0.0;
};

inline BatchUpdate fit_batch(const NetworkParams& online, const NetworkParams& target,
                             std::span<const Transition> batch, const AgentConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::vector<double> targets = td_targets(batch, target, cfg.gamma);
  GradientSet grads{};
  const double w = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    loss += accumulate_gradient(online, batch[k].obs, batch[k].action, targets[k], grads, w);
  }
  clip_gradient(grads, cfg.grad_clip);
  return {sgd_step(online, grads, cfg.learning_rate), loss * w};
}

enum class TrainStatus { Trained, Underfull };

struct TrainResult {
  TrainStatus status = TrainStatus::Underfull;
  double loss = 0.0;
};

/// Copies online into target when iteration is a positive multiple of sync_every.
inline bool maybe_sync_target(const NetworkParams& online, NetworkParams& target,
                              std::uint64_t iteration, std::size_t sync_every) {
  if (iteration == 0 || iteration % sync_every != 0) return false;
  target = online;
  return true;
}

/// Online/target networks, replay pool, schedule counters and the agent's
/// private random stream (exploration and minibatch draws).
class DqnAgent {
 public:
  explicit DqnAgent(const AgentConfig& cfg = {}, std::uint64_t seed = 0)
      : cfg_(cfg), pool_(cfg.memory_size), rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    cfg_.validate();
    online_ = init_network(seed);
    target_ = online_;
    epsilon_ = cfg_.epsilon_start;
  }

  const AgentConfig& config() const { return cfg_; }
  const NetworkParams& online() const { return online_; }
  const NetworkParams& target() const { return target_; }
  const ReplayPool& pool() const { return pool_; }
  double epsilon() const { return epsilon_; }
  std::uint64_t env_steps() const { return env_steps_; }
  std::uint64_t iterations() const { return iterations_; }

  void set_online(const NetworkParams& p) { online_ = p; }
  void set_target(const NetworkParams& p) { target_ = p; }

  std::array<double, kNumActions> q_values(const Observation& obs) const {
    return forward(online_, obs);
  }

  std::size_t act(const Observation& obs, bool explore) {
    return select_action(q_values(obs), explore ? epsilon_ : 0.0, rng_);
  }

  void remember(const Transition& t) { pool_.push(t); }

  /// One environment step has elapsed.
  void tick() {
    ++env_steps_;
    epsilon_ = epsilon_after(env_steps_, cfg_);
  }

  TrainResult train_iteration() {
    if (pool_.size() < cfg_.batch_size) return {TrainStatus::Underfull, 0.0};
    std::vector<Transition> batch;
    batch.reserve(cfg_.batch_size);
    for (std::size_t i : pool_.sample_indices(cfg_.batch_size, rng_)) batch.push_back(pool_[i]);
    BatchUpdate up = fit_batch(online_, target_, batch, cfg_);
    if (!std::isfinite(up.loss) || !up.params.all_finite()) {
      throw std::runtime_error("non-finite loss at training iteration " +
                               std::to_string(iterations_ + 1));
    }
    online_ = up.params;
    ++iterations_;
    maybe_sync_target(online_, target_, iterations_, cfg_.sync_every);
    return {TrainStatus::Trained, up.loss};
  }

 private:
  AgentConfig cfg_;
  NetworkParams online_{};
  NetworkParams target_{};
  ReplayPool pool_;
  std::mt19937_64 rng_;
  double epsilon_ = 0.9;
  std::uint64_t env_steps_ = 0;
  std::uint64_t iterations_ = 0;
};

}  // namespace dr2l
