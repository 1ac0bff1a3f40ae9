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

// Lane-based highway micro-simulator: a 5-lane road, one controllable ego car
// and eight scripted neighbours that hold lane and speed for the whole
// episode. Everything here is a pure function of its arguments.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace dr2l {

inline constexpr int kNumLanes = 5;
inline constexpr std::size_t kNumVehicles = 9;
inline constexpr std::size_t kNumNeighbors = kNumVehicles - 1;
inline constexpr std::size_t kNumActions = 5;
inline constexpr std::size_t kObservationSize = kNumLanes + kNumVehicles + kNumNeighbors;
inline constexpr int kEgoStartLane = 2;

enum class Action : int { Accelerate = 0, Decelerate = 1, Left = 2, Right = 3, Noop = 4 };

inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::Accelerate, Action::Decelerate, Action::Left, Action::Right, Action::Noop};

inline Action action_from_index(std::size_t i) {
  if (i >= kNumActions) throw std::out_of_range("action index out of range");
  return static_cast<Action>(i);
}

inline std::size_t action_index(Action a) { return static_cast<std::size_t>(a); }

inline char action_letter(Action a) {
  static constexpr std::array<char, kNumActions> letters = {'A', 'D', 'L', 'R', 'N'};
  return letters[action_index(a)];
}

enum class Terminal { None, Collided, Arrived, Timeout };

inline std::string_view to_string(Terminal t) {
  switch (t) {
    case Terminal::None: return "none";
    case Terminal::Collided: return "collided";
    case Terminal::Arrived: return "arrived";
    case Terminal::Timeout: return "timeout";
  }
  return "none";
}

inline Terminal terminal_from_string(std::string_view s) {
  if (s == "collided") return Terminal::Collided;
  if (s == "arrived") return Terminal::Arrived;
  if (s == "timeout") return Terminal::Timeout;
  if (s == "none") return Terminal::None;
  throw std::invalid_argument("unknown outcome '" + std::string(s) + "'");
}

struct VehicleState {
  int lane = kEgoStartLane;
  double position = 0.0;  // metres from the ego start line
  double velocity = 0.0;  // m/s

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Ego first, then the neighbours row by row (front, beside, behind) and
/// column by column (left to right), skipping the ego's own cell.
struct GridPos {
  int row;
  int col;
};

inline constexpr std::array<GridPos, kNumVehicles> kGridOrder = {{
    {1, 1},                          // ego
    {0, 0}, {0, 1}, {0, 2},          // 20 m ahead
    {1, 0}, {1, 2},                  // 10 m behind, adjacent lanes
    {2, 0}, {2, 1}, {2, 2},          // 20 m behind
}};

/// Longitudinal offset of each grid row relative to the ego's start.
inline constexpr double row_offset(int row, int col) {
  if (row == 0) return 20.0;
  if (row == 2) return -20.0;
  return col == 1 ? 0.0 : -10.0;
}

/// Grid columns 0..2 occupy the three centre lanes; lanes 0 and 4 start empty.
inline constexpr int column_lane(int col) { return col + 1; }

struct EnvConfig {
  double v_max = 30.0;            // ego speed limit, m/s
  double distance = 200.0;        // journey length d, m
  double dt = 1.0;                // s per step
  double acceleration = 3.0;      // m/s^2 for A and D
  double car_length = 5.0;        // m
  double t_max = 60.0;            // episode timeout, s
  double distance_clip = 100.0;   // observation clip for relative distances, m
  double min_velocity = 0.0;      // admissible initial velocities, m/s
  double max_velocity = 30.0;
  double r_arrive = 20.0;
  double r_collision = -20.0;
};

struct RewardConfig {
  double r_arrive = 20.0;
  double r_collision = -20.0;
  double v_max = 30.0;
  double distance = 200.0;
};

inline RewardConfig reward_config(const EnvConfig& cfg) {
  return {cfg.r_arrive, cfg.r_collision, cfg.v_max, cfg.distance};
}

struct ScenarioSample {
  std::array<double, kNumVehicles> initial_velocities{};

  friend bool operator==(const ScenarioSample&, const ScenarioSample&) = default;
};

struct WorldState {
  std::array<VehicleState, kNumVehicles> vehicles{};
  double elapsed_time = 0.0;
  Terminal terminal = Terminal::None;

  const VehicleState& ego() const { return vehicles[0]; }
  bool done() const { return terminal != Terminal::None; }

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

struct StepOutcome {
  bool collision = false;
  bool arrive = false;
  bool timeout = false;
};

using Observation = std::array<double, kObservationSize>;

inline WorldState build_scenario(const ScenarioSample& sample, const EnvConfig& cfg = {}) {
  WorldState world;
  for (std::size_t i = 0; i < kNumVehicles; ++i) {
    const double v = sample.initial_velocities[i];
    if (!(v >= cfg.min_velocity && v <= cfg.max_velocity)) {
      std::ostringstream msg;
      msg << "initial velocity " << i << " = " << v << " outside [" << cfg.min_velocity << ", "
          << cfg.max_velocity << "]";
      throw std::invalid_argument(msg.str());
    }
    const auto [row, col] = kGridOrder[i];
    world.vehicles[i] = {column_lane(col), row_offset(row, col), v};
  }
  return world;
}

/// Same lane and closer than one car length. Symmetric in its arguments.
inline bool overlapping(const VehicleState& a, const VehicleState& b, double car_length) {
  return a.lane == b.lane && std::abs(a.position - b.position) < car_length;
}

namespace detail {

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

// Overlap before or after the move, or the pair swapped order within the
// lane during the step (a pass-through at high closing speed).
inline bool ego_collides(const VehicleState& ego_before, const VehicleState& ego_after,
                         const VehicleState& other_before, const VehicleState& other_after,
                         double car_length) {
  if (ego_after.lane != other_after.lane) return false;
  if (overlapping(ego_before, other_before, car_length)) return true;
  if (overlapping(ego_after, other_after, car_length)) return true;
  const int before = sign(other_before.position - ego_before.position);
  const int after = sign(other_after.position - ego_after.position);
  return before != after;
}

}  // namespace detail

inline std::pair<WorldState, StepOutcome> step(const WorldState& state, Action action,
                                               const EnvConfig& cfg = {}) {
  if (state.done()) {
    throw std::logic_error("step called on a terminal state (" +
                           std::string(to_string(state.terminal)) + ")");
  }
  WorldState next = state;
  VehicleState& ego = next.vehicles[0];

  switch (action) {
    case Action::Accelerate:
      ego.velocity = std::min(cfg.v_max, ego.velocity + cfg.acceleration * cfg.dt);
      break;
    case Action::Decelerate:
      ego.velocity = std::max(0.0, ego.velocity - cfg.acceleration * cfg.dt);
      break;
    case Action::Left:
      ego.lane = std::max(0, ego.lane - 1);
      break;
    case Action::Right:
      ego.lane = std::min(kNumLanes - 1, ego.lane + 1);
      break;
    case Action::Noop:
      break;
  }
  // The lane change is instantaneous; the collision test below works on the
  // post-change lane with pre-move positions as the "before" picture.
  const std::array<VehicleState, kNumVehicles> before = next.vehicles;

  for (auto& v : next.vehicles) v.position += v.velocity * cfg.dt;
  next.elapsed_time = state.elapsed_time + cfg.dt;

  StepOutcome out;
  for (std::size_t i = 1; i < kNumVehicles && !out.collision; ++i) {
    out.collision = detail::ego_collides(before[0], ego, before[i], next.vehicles[i],
                                         cfg.car_length);
  }
  if (out.collision) {
    next.terminal = Terminal::Collided;
  } else if (ego.position >= cfg.distance) {
    out.arrive = true;
    next.terminal = Terminal::Arrived;
  } else if (next.elapsed_time >= cfg.t_max - 1e-9) {
    out.timeout = true;
    next.terminal = Terminal::Timeout;
  }
  return {next, out};
}

/// [ego lane one-hot (5) | velocities / v_max (9) | clipped neighbour gaps / clip (8)]
inline Observation observe(const WorldState& state, double v_max, double distance_clip = 100.0) {
  Observation obs{};
  const VehicleState& ego = state.ego();
  obs[static_cast<std::size_t>(std::clamp(ego.lane, 0, kNumLanes - 1))] = 1.0;
  for (std::size_t i = 0; i < kNumVehicles; ++i) {
    obs[kNumLanes + i] = std::clamp(state.vehicles[i].velocity / v_max, 0.0, 1.0);
  }
  for (std::size_t i = 1; i < kNumVehicles; ++i) {
    const double gap = state.vehicles[i].position - ego.position;
    obs[kNumLanes + kNumVehicles + i - 1] =
        std::clamp(gap, -distance_clip, distance_clip) / distance_clip;
  }
  return obs;
}

inline Observation observe(const WorldState& state, const EnvConfig& cfg) {
  return observe(state, cfg.v_max, cfg.distance_clip);
}

/// Speed term (v - v_max/2) / v_max plus the terminal safety bonus or penalty.
inline double reward(const WorldState& state, const StepOutcome& outcome, const RewardConfig& cfg) {
  const double r_v = (state.ego().velocity - cfg.v_max / 2.0) / cfg.v_max;
  const double r_safety = cfg.r_collision * (outcome.collision ? 1.0 : 0.0) +
                          cfg.r_arrive * (outcome.arrive ? 1.0 : 0.0);
  return r_v + r_safety;
}

struct RewardCheck {
  bool ok = false;
  double gap = 0.0;       // r_arrive - r_collision
  double required = 0.0;  // 2 d / v_max

  std::string message() const {
    std::ostringstream msg;
    msg.setf(std::ios::fixed);
    msg.precision(2);
    msg << "r_arrive - r_collision = " << gap << (ok ? " >= " : " < ") << "2d/v_max = " << required;
    return msg.str();
  }
};

/// Arrival must beat a max-speed crash even for the slowest safe driver:
/// r_arrive - r_collision >= 2 d / v_max.
inline RewardCheck validate_reward_config(const RewardConfig& cfg) {
  if (!(cfg.v_max > 0.0)) throw std::invalid_argument("v_max must be positive");
  if (!(cfg.distance >= 0.0)) throw std::invalid_argument("distance must be non-negative");
  RewardCheck check;
  check.gap = cfg.r_arrive - cfg.r_collision;
  check.required = 2.0 * cfg.distance / cfg.v_max;
  check.ok = check.gap >= check.required;
  return check;
}

}  // namespace dr2l
