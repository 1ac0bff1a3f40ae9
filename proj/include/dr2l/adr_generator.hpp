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

// Automatic domain randomisation over per-parameter uniform ranges.
//
// Every randomised parameter i is drawn from U(lower_i, upper_i). Boundary
// episodes pin one parameter to one end of its range; their performance is
// queued per boundary, and once a queue holds N values its mean decides the
// update for that boundary:
//
//   mean >= p_high  ->  widen by `step`,      p_high <- mean
//   mean <= p_low   ->  narrow by `step / 2`, p_low  <- mean
//
// The queue is cleared after every decision. Bounds stay inside
// [min_value, max_value] and never cross.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dr2l {

enum class Side { Lower = 0, Upper = 1 };

inline std::string_view to_string(Side s) { return s == Side::Lower ? "lower" : "upper"; }

inline Side side_from_string(std::string_view s) {
  if (s == "lower") return Side::Lower;
  if (s == "upper") return Side::Upper;
  throw std::invalid_argument("unknown boundary side '" + std::string(s) + "'");
}

/// Parameter indices are zero-based.
struct BoundaryId {
  std::size_t param = 0;
  Side side = Side::Lower;

  std::size_t flat() const { return 2 * param + static_cast<std::size_t>(side); }
  friend bool operator==(const BoundaryId&, const BoundaryId&) = default;
};

/// What a queued boundary-episode value stands for.
enum class PerformanceMode {
  EpisodeReturn,  // one value per boundary episode: its cumulative reward
  StepReward,     // one value per step of a boundary episode: that step's reward
};

struct GeneratorConfig {
  double boundary_prob = 0.5;
  double step = 0.5;
  double increase_threshold = 15.0;
  double decrease_threshold = 13.0;
  std::size_t queue_size = 10;
  double min_value = 0.0;
  double max_value = 30.0;
  std::vector<double> initial_lower;
  std::vector<double> initial_upper;
  PerformanceMode performance = PerformanceMode::EpisodeReturn;

  std::size_t dimension() const { return initial_lower.size(); }

  void validate() const {
    if (!(boundary_prob >= 0.0 && boundary_prob <= 1.0)) {
      throw std::invalid_argument("boundary_prob must lie in [0, 1]");
    }
    if (!(step >= 0.0)) throw std::invalid_argument("step must be non-negative");
    if (!(decrease_threshold < increase_threshold)) {
      throw std::invalid_argument("decrease_threshold must be below increase_threshold");
    }
    if (queue_size == 0) throw std::invalid_argument("queue_size must be positive");
    if (!(min_value <= max_value)) throw std::invalid_argument("min_value exceeds max_value");
    if (initial_lower.empty() || initial_lower.size() != initial_upper.size()) {
      throw std::invalid_argument("initial_lower/initial_upper must be non-empty and equal length");
    }
    for (std::size_t i = 0; i < initial_lower.size(); ++i) {
      const double lo = initial_lower[i], hi = initial_upper[i];
      if (!(min_value <= lo && lo <= hi && hi <= max_value)) {
        throw std::invalid_argument("initial range " + std::to_string(i) +
                                    " must satisfy min_value <= lower <= upper <= max_value");
      }
    }
  }
};

struct BoundaryState {
  std::vector<double> queue;
  double p_high = 15.0;
  double p_low = 13.0;

  friend bool operator==(const BoundaryState&, const BoundaryState&) = default;
};

class DistributionState {
 public:
  DistributionState() = default;
  explicit DistributionState(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    lower_ = cfg_.initial_lower;
    upper_ = cfg_.initial_upper;
    boundaries_.assign(2 * lower_.size(),
                       BoundaryState{{}, cfg_.increase_threshold, cfg_.decrease_threshold});
  }

  const GeneratorConfig& config() const { return cfg_; }
  std::size_t dimension() const { return lower_.size(); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  double lower(std::size_t i) const { return lower_.at(i); }
  double upper(std::size_t i) const { return upper_.at(i); }
  double bound(BoundaryId b) const { return b.side == Side::Lower ? lower(b.param) : upper(b.param); }

  const BoundaryState& boundary(BoundaryId b) const { return boundaries_.at(checked(b).flat()); }

  /// Replaces the ranges wholesale (frozen snapshot environments).
  void set_bounds(std::vector<double> lower, std::vector<double> upper) {
    if (lower.size() != dimension() || upper.size() != dimension()) {
      throw std::invalid_argument("bounds dimension mismatch");
    }
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (!(cfg_.min_value <= lower[i] && lower[i] <= upper[i] && upper[i] <= cfg_.max_value)) {
        throw std::invalid_argument("bounds " + std::to_string(i) + " violate the range clamps");
      }
    }
    lower_ = std::move(lower);
    upper_ = std::move(upper);
  }

  friend bool operator==(const DistributionState& a, const DistributionState& b) {
    return a.lower_ == b.lower_ && a.upper_ == b.upper_ && a.boundaries_ == b.boundaries_;
  }

 private:
  template <class Rng>
  friend std::vector<double> episode_sample(const DistributionState&, Rng&);
  friend void record_performance(DistributionState&, BoundaryId, double);
  friend struct UpdateAccess;

  BoundaryId checked(BoundaryId b) const {
    if (b.param >= dimension()) throw std::out_of_range("boundary parameter out of range");
    return b;
  }

  GeneratorConfig cfg_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<BoundaryState> boundaries_;
};

/// Each parameter independently uniform on its current range.
template <class Rng>
std::vector<double> episode_sample(const DistributionState& state, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> lambda(state.dimension());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double lo = state.lower_[i], hi = state.upper_[i];
    lambda[i] = std::min(hi, lo + (hi - lo) * unit(rng));
  }
  return lambda;
}

struct BoundarySample {
  std::vector<double> lambda;
  BoundaryId boundary;
};

/// Pins the chosen boundary's parameter to that bound; the rest are episode-sampled.
template <class Rng>
BoundarySample boundary_sample_at(const DistributionState& state, BoundaryId b, Rng& rng) {
  BoundarySample out{episode_sample(state, rng), b};
  out.lambda.at(b.param) = state.bound(b);
  return out;
}

/// Parameter uniform over 0..d-1, lower side iff x < 0.5 with x ~ U(0, 1).
template <class Rng>
BoundarySample boundary_sample(const DistributionState& state, Rng& rng) {
  if (state.dimension() == 0) throw std::logic_error("boundary sampling with no parameters");
  std::vector<double> lambda = episode_sample(state, rng);
  std::uniform_int_distribution<std::size_t> pick(0, state.dimension() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t i = pick(rng);
  const double x = unit(rng);
  const BoundaryId b{i, x < 0.5 ? Side::Lower : Side::Upper};
  lambda[i] = state.bound(b);
  return {std::move(lambda), b};
}

inline void record_performance(DistributionState& state, BoundaryId b, double p) {
  if (!std::isfinite(p)) throw std::invalid_argument("performance value must be finite");
  state.boundaries_.at(state.checked(b).flat()).queue.push_back(p);
}

enum class UpdateAction { None, Expanded, Contracted };

inline std::string_view to_string(UpdateAction a) {
  switch (a) {
    case UpdateAction::Expanded: return "expanded";
    case UpdateAction::Contracted: return "contracted";
    case UpdateAction::None: break;
  }
  return "none";
}

struct UpdateEvent {
  BoundaryId boundary;
  double mean_performance = 0.0;
  UpdateAction action = UpdateAction::None;
  double old_bound = 0.0;
  double new_bound = 0.0;
  double new_threshold = 0.0;  // p_high after an expansion, p_low after a contraction
};

struct UpdateAccess {
  static std::vector<double>& lower(DistributionState& s) { return s.lower_; }
  static std::vector<double>& upper(DistributionState& s) { return s.upper_; }
  static BoundaryState& boundary(DistributionState& s, BoundaryId b) {
    return s.boundaries_.at(s.checked(b).flat());
  }
};

/// Returns nullopt while the boundary's queue is short of N entries;
/// otherwise an event (possibly UpdateAction::None) and the queue is empty.
inline std::optional<UpdateEvent> maybe_update(DistributionState& state, BoundaryId b) {
  BoundaryState& bs = UpdateAccess::boundary(state, b);
  const GeneratorConfig& cfg = state.config();
  if (bs.queue.size() < cfg.queue_size) return std::nullopt;

  const double mean = std::accumulate(bs.queue.begin(), bs.queue.end(), 0.0) /
                      static_cast<double>(bs.queue.size());
  bs.queue.clear();

  double& lo = UpdateAccess::lower(state)[b.param];
  double& hi = UpdateAccess::upper(state)[b.param];
  double& bound = b.side == Side::Lower ? lo : hi;

  UpdateEvent ev;
  ev.boundary = b;
  ev.mean_performance = mean;
  ev.old_bound = bound;

  if (mean >= bs.p_high) {
    ev.action = UpdateAction::Expanded;
    if (b.side == Side::Upper) {
      hi = std::min(cfg.max_value, hi + cfg.step);
    } else {
      lo = std::max(cfg.min_value, lo - cfg.step);
    }
    bs.p_high = mean;
    ev.new_threshold = mean;
  } else if (mean <= bs.p_low) {
    ev.action = UpdateAction::Contracted;
    const double half = cfg.step / 2.0;
    if (b.side == Side::Upper) {
      hi = std::max(lo, hi - half);
    } else {
      lo = std::min(hi, lo + half);
    }
    bs.p_low = mean;
    ev.new_threshold = mean;
  }
  ev.new_bound = bound;
  return ev;
}

struct BoundsRow {
  std::size_t param = 0;
  double lower = 0.0;
  double upper = 0.0;

  friend bool operator==(const BoundsRow&, const BoundsRow&) = default;
};

inline std::vector<BoundsRow> snapshot_bounds(const DistributionState& state) {
  std::vector<BoundsRow> rows;
  rows.reserve(state.dimension());
  for (std::size_t i = 0; i < state.dimension(); ++i) {
    rows.push_back({i, state.lower(i), state.upper(i)});
  }
  return rows;
}

}  // namespace dr2l
