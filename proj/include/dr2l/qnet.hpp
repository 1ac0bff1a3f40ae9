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

// Small fully connected Q-network with two rectifier hidden layers and a
// linear head. Gradients are written out by hand; the layer sizes are
// template parameters so shape mistakes fail to compile.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

namespace dr2l {

template <std::size_t In, std::size_t Out>
struct DenseLayer {
  static constexpr std::size_t kIn = In;
  static constexpr std::size_t kOut = Out;

  std::array<double, In * Out> weights{};  // row-major, weights[i * Out + j]: input i -> unit j
  std::array<double, Out> bias{};

  double& w(std::size_t i, std::size_t j) { return weights[i * Out + j]; }
  double w(std::size_t i, std::size_t j) const { return weights[i * Out + j]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

template <std::size_t In, std::size_t H1, std::size_t H2, std::size_t Out>
struct MlpParams {
  static constexpr std::size_t kInputs = In;
  static constexpr std::size_t kOutputs = Out;
  static constexpr std::size_t kParamCount = In * H1 + H1 + H1 * H2 + H2 + H2 * Out + Out;

  DenseLayer<In, H1> l1;
  DenseLayer<H1, H2> l2;
  DenseLayer<H2, Out> l3;

  /// Weight/bias blocks in serialization order.
  std::array<std::span<double>, 6> blocks() {
    return {l1.weights, l1.bias, l2.weights, l2.bias, l3.weights, l3.bias};
  }
  std::array<std::span<const double>, 6> blocks() const {
    return {l1.weights, l1.bias, l2.weights, l2.bias, l3.weights, l3.bias};
  }

  template <class F>
  void for_each(F&& f) {
    for (auto block : blocks())
      for (double& x : block) f(x);
  }
  template <class F>
  void for_each(F&& f) const {
    for (auto block : blocks())
      for (double x : block) f(x);
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](double x) { ok = ok && std::isfinite(x); });
    return ok;
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

using NetworkParams = MlpParams<22, 20, 10, 5>;
/// Gradients share the parameter layout.
using GradientSet = NetworkParams;

namespace detail {

template <std::size_t In, std::size_t Out>
void init_layer(DenseLayer<In, Out>& layer, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(In));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& w : layer.weights) w = dist(rng);
  layer.bias.fill(0.0);
}

template <std::size_t In, std::size_t Out>
void affine(const DenseLayer<In, Out>& layer, std::span<const double, In> x,
            std::array<double, Out>& out) {
  out = layer.bias;
  for (std::size_t i = 0; i < In; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = layer.weights.data() + i * Out;
    for (std::size_t j = 0; j < Out; ++j) out[j] += xi * row[j];
  }
}

template <std::size_t N>
void relu(std::array<double, N>& v) {
  for (double& x : v) x = std::max(0.0, x);
}

}  // namespace detail

/// Weights uniform in +-sqrt(6 / fan_in), biases zero.
template <class Params = NetworkParams>
Params init_network(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Params p;
  detail::init_layer(p.l1, rng);
  detail::init_layer(p.l2, rng);
  detail::init_layer(p.l3, rng);
  return p;
}

/// Intermediate activations kept for the backward pass.
template <std::size_t In, std::size_t H1, std::size_t H2, std::size_t Out>
struct ForwardCache {
  std::array<double, In> input{};
  std::array<double, H1> h1{};
  std::array<double, H2> h2{};
  std::array<double, Out> q{};
};

template <std::size_t In, std::size_t H1, std::size_t H2, std::size_t Out>
ForwardCache<In, H1, H2, Out> forward_cached(const MlpParams<In, H1, H2, Out>& p,
                                             std::span<const double> obs) {
  if (obs.size() != In) {
    throw std::invalid_argument("observation has " + std::to_string(obs.size()) +
                                " components, network expects " + std::to_string(In));
  }
  ForwardCache<In, H1, H2, Out> c;
  std::copy(obs.begin(), obs.end(), c.input.begin());
  detail::affine(p.l1, std::span<const double, In>(c.input), c.h1);
  detail::relu(c.h1);
  detail::affine(p.l2, std::span<const double, H1>(c.h1), c.h2);
  detail::relu(c.h2);
  detail::affine(p.l3, std::span<const double, H2>(c.h2), c.q);
  return c;
}

template <std::size_t In, std::size_t H1, std::size_t H2, std::size_t Out>
std::array<double, Out> forward(const MlpParams<In, H1, H2, Out>& p, std::span<const double> obs) {
  return forward_cached(p, obs).q;
}

struct LossAndGrad {
  double loss = 0.0;
  GradientSet grads{};
};

/// Squared TD error (target - Q(obs, action))^2 and its gradient. Only the
/// selected head contributes, so the other output units get zero gradient.
/// Accumulates into `grads` (scaled by `weight`) and returns the loss.
template <std::size_t In, std::size_t H1, std::size_t H2, std::size_t Out>
double accumulate_gradient(const MlpParams<In, H1, H2, Out>& p, std::span<const double> obs,
                           std::size_t action, double td_target,
                           MlpParams<In, H1, H2, Out>& grads, double weight = 1.0) {
  if (action >= Out) throw std::out_of_range("action index out of range");
  const auto c = forward_cached(p, obs);
  const double err = c.q[action] - td_target;
  const double loss = err * err;
  const double dq = 2.0 * err * weight;

  // output layer: only column `action`
  std::array<double, H2> dh2{};
  for (std::size_t i = 0; i < H2; ++i) {
    grads.l3.w(i, action) += dq * c.h2[i];
    dh2[i] = (c.h2[i] > 0.0) ? dq * p.l3.w(i, action) : 0.0;
  }
  grads.l3.bias[action] += dq;

  std::array<double, H1> dh1{};
  for (std::size_t i = 0; i < H1; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < H2; ++j) {
      grads.l2.w(i, j) += dh2[j] * c.h1[i];
      acc += dh2[j] * p.l2.w(i, j);
    }
    dh1[i] = (c.h1[i] > 0.0) ? acc : 0.0;
  }
  for (std::size_t j = 0; j < H2; ++j) grads.l2.bias[j] += dh2[j];

  for (std::size_t i = 0; i < In; ++i) {
    const double xi = c.input[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < H1; ++j) grads.l1.w(i, j) += dh1[j] * xi;
  }
  for (std::size_t j = 0; j < H1; ++j) grads.l1.bias[j] += dh1[j];
  return loss;
}

inline LossAndGrad backward(const NetworkParams& p, std::span<const double> obs,
                            std::size_t action, double td_target) {
  if (!std::isfinite(td_target)) throw std::invalid_argument("td_target must be finite");
  LossAndGrad out;
  out.loss = accumulate_gradient(p, obs, action, td_target, out.grads);
  return out;
}

/// Elementwise clip to [-limit, limit]; limit <= 0 leaves the gradient alone.
template <class Params>
void clip_gradient(Params& g, double limit) {
  if (limit <= 0.0) return;
  g.for_each([limit](double& x) { x = std::clamp(x, -limit, limit); });
}

/// params - lr * grads. The caller is responsible for batch averaging.
template <class Params>
Params sgd_step(const Params& params, const Params& grads, double learning_rate) {
  Params out = params;
  auto dst = out.blocks();
  const auto src = grads.blocks();
  for (std::size_t b = 0; b < dst.size(); ++b) {
    for (std::size_t k = 0; k < dst[b].size(); ++k) dst[b][k] -= learning_rate * src[b][k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot format (text, one token stream):
//
//   dr2l-qnet 1
//   layers 3
//   layer <in> <out>
//   <in lines of <out> weights, row-major>
//   bias <out values>
//   ... repeated per layer ...
//   end
//
// Numbers use the shortest round-trip decimal form, so a reload is exact.
// ---------------------------------------------------------------------------

inline std::string format_double(double x) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc{}) throw std::runtime_error("failed to format number");
  return std::string(buf.data(), ptr);
}

inline double parse_double(const std::string& token) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw std::runtime_error("malformed number '" + token + "'");
  }
  return value;
}

namespace detail {

template <std::size_t In, std::size_t Out>
void write_layer(std::ostream& os, const DenseLayer<In, Out>& layer) {
  os << "layer " << In << ' ' << Out << '\n';
  for (std::size_t i = 0; i < In; ++i) {
    for (std::size_t j = 0; j < Out; ++j) os << (j ? " " : "") << format_double(layer.w(i, j));
    os << '\n';
  }
  os << "bias";
  for (double b : layer.bias) os << ' ' << format_double(b);
  os << '\n';
}

inline void expect_token(std::istream& is, const std::string& want) {
  std::string tok;
  if (!(is >> tok) || tok != want) {
    throw std::runtime_error("snapshot: expected '" + want + "', got '" + tok + "'");
  }
}

inline double read_number(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw std::runtime_error("snapshot: truncated");
  return parse_double(tok);
}

template <std::size_t In, std::size_t Out>
void read_layer(std::istream& is, DenseLayer<In, Out>& layer) {
  expect_token(is, "layer");
  std::size_t in = 0, out = 0;
  if (!(is >> in >> out) || in != In || out != Out) {
    std::ostringstream msg;
    msg << "snapshot: layer shape " << in << "x" << out << ", expected " << In << "x" << Out;
    throw std::runtime_error(msg.str());
  }
  for (double& w : layer.weights) w = read_number(is);
  expect_token(is, "bias");
  for (double& b : layer.bias) b = read_number(is);
}

}  // namespace detail

template <std::size_t In, std::size_t H1, std::size_t H2, std::size_t Out>
void write_snapshot(std::ostream& os, const MlpParams<In, H1, H2, Out>& p) {
  os << "dr2l-qnet 1\nlayers 3\n";
  detail::write_layer(os, p.l1);
  detail::write_layer(os, p.l2);
  detail::write_layer(os, p.l3);
  os << "end\n";
}

template <class Params = NetworkParams>
Params read_snapshot(std::istream& is) {
  detail::expect_token(is, "dr2l-qnet");
  detail::expect_token(is, "1");
  detail::expect_token(is, "layers");
  detail::expect_token(is, "3");
  Params p;
  detail::read_layer(is, p.l1);
  detail::read_layer(is, p.l2);
  detail::read_layer(is, p.l3);
  detail::expect_token(is, "end");
  if (!p.all_finite()) throw std::runtime_error("snapshot: non-finite parameter");
  return p;
}

}  // namespace dr2l
