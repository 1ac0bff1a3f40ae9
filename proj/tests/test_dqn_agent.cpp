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

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <deque>
#include <random>
#include <vector>

#include "dr2l/dqn_agent.hpp"
#include "support/oracles.hpp"

namespace dr2l {
namespace {

using namespace testing_oracles;

Observation obs_from(std::mt19937_64& rng) {
  const auto v = random_obs(rng);
  Observation o{};
  std::copy(v.begin(), v.end(), o.begin());
  return o;
}

Transition tagged(double tag) {
  Transition t;
  t.reward = tag;
  return t;
}

TEST(SelectAction, GreedyWhenEpsilonIsZero) {
  std::mt19937_64 rng(1);
  const std::array<double, 5> q = {0.1, -2.0, 3.5, 3.4, 0.0};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(select_action(q, 0.0, rng), 2u);
}

TEST(SelectAction, TiesGoToLowestIndex) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(select_action(std::array<double, 5>{}, 0.0, rng), 0u);
  EXPECT_EQ(select_action(std::array<double, 5>{0, 1, 1, 0, 1}, 0.0, rng), 1u);
}

TEST(SelectAction, UniformWhenEpsilonIsOne) {
  std::mt19937_64 rng(2);
  const std::array<double, 5> q = {0, 0, 9, 0, 0};
  constexpr int n = 100000;
  std::array<int, 5> counts{};
  for (int i = 0; i < n; ++i) ++counts[select_action(q, 1.0, rng)];
  const double mean = n / 5.0;
  const double sigma = std::sqrt(n * 0.2 * 0.8);
  for (int c : counts) EXPECT_LE(std::abs(c - mean), 3.0 * sigma);
}

TEST(SelectAction, RejectsBadEpsilon) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(select_action(std::array<double, 5>{}, 1.5, rng), std::invalid_argument);
  EXPECT_THROW(select_action(std::array<double, 5>{}, -0.1, rng), std::invalid_argument);
}

TEST(EpsilonSchedule, SingleDecay) {
  EXPECT_DOUBLE_EQ(decay_epsilon(0.9), 0.899996);
  EXPECT_EQ(decay_epsilon(0.1), 0.1);
  EXPECT_EQ(decay_epsilon(0.100001), 0.1);
}

TEST(EpsilonSchedule, FloorReachedAtExactlyTwoHundredThousandSteps) {
  EXPECT_GT(epsilon_after(199999), 0.1);
  EXPECT_EQ(epsilon_after(200000), 0.1);
  EXPECT_EQ(epsilon_after(10'000'000), 0.1);
  EXPECT_EQ(epsilon_after(0), 0.9);
}

TEST(EpsilonSchedule, AgentTicksFollowTheClosedForm) {
  DqnAgent agent;
  double prev = agent.epsilon();
  for (std::uint64_t s = 1; s <= 200000; ++s) {
    agent.tick();
    ASSERT_LE(agent.epsilon(), prev);
    ASSERT_GE(agent.epsilon(), 0.1);
    if (s < 200000) ASSERT_GT(agent.epsilon(), 0.1) << "step " << s;
    prev = agent.epsilon();
  }
  EXPECT_EQ(agent.epsilon(), 0.1);
}

TEST(ReplayPool, FirstPush) {
  ReplayPool pool(2000);
  EXPECT_TRUE(pool.empty());
  pool.push(tagged(1.0));
  EXPECT_EQ(pool.size(), 1u);
}

TEST(ReplayPool, EvictsTheOldestWhenFull) {
  ReplayPool pool(2000);
  for (int i = 0; i < 2001; ++i) pool.push(tagged(i));
  EXPECT_EQ(pool.size(), 2000u);
  for (std::size_t i = 0; i < pool.size(); ++i) ASSERT_NE(pool[i].reward, 0.0);
  EXPECT_EQ(pool[0].reward, 1.0);
  EXPECT_EQ(pool[1999].reward, 2000.0);
}

TEST(ReplayPool, MatchesABoundedDequeOracle) {
  ReplayPool pool(3);
  std::deque<double> oracle;
  for (int i = 0; i < 10; ++i) {
    pool.push(tagged(i));
    oracle.push_back(i);
    if (oracle.size() > 3) oracle.pop_front();
    ASSERT_EQ(pool.size(), oracle.size());
    for (std::size_t k = 0; k < oracle.size(); ++k) ASSERT_EQ(pool[k].reward, oracle[k]);
  }
}

TEST(ReplayPool, SamplingIsUniform) {
  ReplayPool pool(100);
  for (int i = 0; i < 100; ++i) pool.push(tagged(i));
  std::mt19937_64 rng(3);
  constexpr int n = 100000;
  std::vector<int> counts(100, 0);
  for (std::size_t idx : pool.sample_indices(n, rng)) ++counts[idx];
  const double mean = n / 100.0;
  const double sigma = std::sqrt(n * 0.01 * 0.99);
  // 4 sigma per item keeps the family-wise false alarm rate near 0.6% over 100 items
  double chi2 = 0.0;
  for (int c : counts) {
    EXPECT_LE(std::abs(c - mean), 4.0 * sigma);
    chi2 += (c - mean) * (c - mean) / mean;
  }
  EXPECT_LT(chi2, 148.2);  // chi-square 99 dof, p = 0.001
}

TEST(TdTargets, TerminalTransitionsDoNotBootstrap) {
  NetworkParams target{};
  target.l3.bias = {5.0, 1.0, 2.0, 3.0, 4.0};
  Transition t;
  t.reward = 19.5;
  t.terminal = true;
  EXPECT_EQ(td_target(t, target, 0.9), 19.5);
}

TEST(TdTargets, BootstrapFromTheTargetNetworkMax) {
  NetworkParams target{};
  target.l3.bias = {0.3, 1.0, -2.0, 0.5, 0.0};  // Q(s', .) = bias, max 1.0
  Transition t;
  t.reward = 0.2;
  EXPECT_DOUBLE_EQ(td_target(t, target, 0.9), 1.1);
  EXPECT_DOUBLE_EQ(td_target(t, target, 0.0), 0.2);
}

TEST(TdTargets, TerminalTargetsIgnoreTargetWeights) {
  std::mt19937_64 rng(4);
  std::vector<Transition> batch;
  for (int i = 0; i < 32; ++i) {
    Transition t{obs_from(rng), static_cast<std::size_t>(i % 5), i * 0.5 - 8.0, obs_from(rng), i % 2 == 0};
    batch.push_back(t);
  }
  const auto a = td_targets(batch, init_network(1), 0.9);
  const auto b = td_targets(batch, random_params(77), 0.9);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].terminal) {
      EXPECT_EQ(a[i], batch[i].reward);
      EXPECT_EQ(a[i], b[i]);
    } else {
      EXPECT_NE(a[i], b[i]);
    }
  }
}

TEST(TrainIteration, UnderfullPoolIsANoop) {
  DqnAgent agent;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 31; ++i) agent.remember({obs_from(rng), 0, 1.0, obs_from(rng), false});
  const NetworkParams before = agent.online();
  const TrainResult r = agent.train_iteration();
  EXPECT_EQ(r.status, TrainStatus::Underfull);
  EXPECT_EQ(agent.online(), before);
  EXPECT_EQ(agent.iterations(), 0u);
}

TEST(TrainIteration, ConvergedBatchLeavesParametersAlone) {
  AgentConfig cfg;
  DqnAgent agent(cfg, 6);
  std::mt19937_64 rng(6);
  const Observation o = obs_from(rng);
  // terminal transition whose reward equals the current estimate
  const double q = forward(agent.online(), o)[3];
  for (int i = 0; i < 40; ++i) agent.remember({o, 3, q, o, true});
  const NetworkParams before = agent.online();
  const TrainResult r = agent.train_iteration();
  EXPECT_EQ(r.status, TrainStatus::Trained);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(agent.online(), before);
}

TEST(FitBatch, MatchesStraightLineOracle) {
  std::mt19937_64 rng(7);
  const NetworkParams online = random_params(21);
  const NetworkParams target = random_params(22);
  std::vector<Transition> batch;
  for (int i = 0; i < 32; ++i) {
    batch.push_back({obs_from(rng), static_cast<std::size_t>(i % 5), 0.1 * i - 1.0, obs_from(rng), i % 7 == 0});
  }
  AgentConfig cfg;
  cfg.grad_clip = 0.0;

  // Targets and loss evaluated with the independent forward pass.
  std::vector<double> targets;
  double expect_loss = 0.0;
  for (const auto& t : batch) {
    double y = t.reward;
    if (!t.terminal) {
      const auto qn = oracle_forward(target, std::vector<double>(t.next_obs.begin(), t.next_obs.end()));
      y += 0.9 * *std::max_element(qn.begin(), qn.end());
    }
    targets.push_back(y);
    const double q = oracle_forward(online, std::vector<double>(t.obs.begin(), t.obs.end()))[t.action];
    expect_loss += (y - q) * (y - q);
  }
  expect_loss /= 32.0;

  const BatchUpdate up = fit_batch(online, target, batch, cfg);
  EXPECT_NEAR(up.loss, expect_loss, 1e-12 * std::max(1.0, expect_loss));

  // The step must equal -lr times the finite-difference gradient of the batch loss.
  auto batch_loss = [&](const NetworkParams& p) {
    double l = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const double q = oracle_forward(p, std::vector<double>(batch[k].obs.begin(), batch[k].obs.end()))[batch[k].action];
      l += (targets[k] - q) * (targets[k] - q);
    }
    return l / 32.0;
  };
  NetworkParams probe = online;
  auto pb = probe.blocks();
  const auto before = online.blocks();
  const auto after = up.params.blocks();
  double worst = 0.0;
  for (std::size_t b = 0; b < pb.size(); ++b) {
    for (std::size_t k = 0; k < pb[b].size(); ++k) {
      const double saved = pb[b][k];
      pb[b][k] = saved + 1e-5;
      const double l_up = batch_loss(probe);
      pb[b][k] = saved - 1e-5;
      const double l_down = batch_loss(probe);
      pb[b][k] = saved;
      const double fd_step = -cfg.learning_rate * (l_up - l_down) / 2e-5;
      const double step = after[b][k] - before[b][k];
      worst = std::max(worst, std::abs(step - fd_step));
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(MaybeSyncTarget, OnlyOnMultiples) {
  const NetworkParams online = random_params(1);
  NetworkParams target = random_params(2);
  const NetworkParams original = target;
  EXPECT_FALSE(maybe_sync_target(online, target, 4999, 5000));
  EXPECT_EQ(target, original);
  EXPECT_FALSE(maybe_sync_target(online, target, 0, 5000));
  EXPECT_TRUE(maybe_sync_target(online, target, 5000, 5000));
  EXPECT_EQ(target, online);
  const NetworkParams online2 = random_params(3);
  EXPECT_TRUE(maybe_sync_target(online2, target, 10000, 5000));
  EXPECT_EQ(target, online2);
}

TEST(DqnAgent, TargetTracksOnlineEveryFiveThousandIterations) {
  DqnAgent agent(AgentConfig{}, 9);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> r(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    agent.remember({obs_from(rng), static_cast<std::size_t>(i % 5), r(rng), obs_from(rng), i % 10 == 0});
  }
  for (int it = 1; it <= 10000; ++it) {
    ASSERT_EQ(agent.train_iteration().status, TrainStatus::Trained);
    if (it == 4999 || it == 9999) ASSERT_NE(agent.target(), agent.online());
    if (it == 5000 || it == 10000) {
      double worst = 0.0;
      const auto a = agent.online().blocks();
      const auto b = agent.target().blocks();
      for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t j = 0; j < a[k].size(); ++j) worst = std::max(worst, std::abs(a[k][j] - b[k][j]));
      ASSERT_EQ(worst, 0.0) << "iteration " << it;
    }
  }
}

TEST(DqnAgent, GreedyActingLeavesStateAlone) {
  DqnAgent agent(AgentConfig{}, 10);
  std::mt19937_64 rng(10);
  const Observation o = obs_from(rng);
  const auto q = agent.q_values(o);
  EXPECT_EQ(agent.act(o, false), greedy_action(q));
  EXPECT_EQ(agent.env_steps(), 0u);
  EXPECT_EQ(agent.pool().size(), 0u);
  EXPECT_EQ(agent.epsilon(), 0.9);
}

TEST(AgentConfig, Validation) {
  AgentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epsilon_min = 0.95;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AgentConfig{};
  c.memory_size = 16;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AgentConfig{};
  c.sync_every = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace dr2l
