// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/flow.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fed/error.hpp"
#include "fed/numeric.hpp"

namespace fed {
namespace {

void sigmoid_inplace(Matrix& m) { m = m.unaryExpr([](double v) { return sigmoid(v); }); }

// splitmix64 finalizer; keyed counter-based uniforms for dropout masks.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Matrix dropout_mask(const DropoutSpec& spec, std::size_t block, Eigen::Index rows,
                    Eigen::Index cols) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - spec.rate);
  const std::uint64_t key = mix64(spec.seed ^ mix64(block + 1));
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(mix64(key + static_cast<std::uint64_t>(i)) >> 11) * 0x1.0p-53;
    mask.data()[i] = u < spec.rate ? 0.0 : keep_scale;
  }
  return mask;
}

void check_inputs(const FlowParams& params, const PixelGrid& grid, const Matrix& z,
                  const Matrix& cond) {
  const auto n = static_cast<Eigen::Index>(grid.pixels());
  if (z.rows() != 2 || z.cols() != n) {
    throw ShapeError("flow input must be 2 x " + std::to_string(n) + ", got " +
                     std::to_string(z.rows()) + " x " + std::to_string(z.cols()));
  }
  const auto p = static_cast<Eigen::Index>(params.config.cond_channels);
  if (cond.rows() != p || (p > 0 && cond.cols() != n)) {
    throw ShapeError("condition map must be " + std::to_string(p) + " x " + std::to_string(n) +
                     ", got " + std::to_string(cond.rows()) + " x " + std::to_string(cond.cols()));
  }
}

Matrix subnet_input(const Matrix& first, const Matrix& cond) {
  Matrix in(1 + cond.rows(), first.cols());
  in.row(0) = first.row(0);
  if (cond.rows() > 0) in.bottomRows(cond.rows()) = cond;
  return in;
}

void check_finite(const Matrix& state, std::size_t block) {
  if (!state.allFinite()) {
    throw NumericError("non-finite value in flow block " + std::to_string(block));
  }
}

// One forward block. `tb` may be null when no tape is needed.
void block_forward(const FlowBlock& b, std::size_t index, const PixelGrid& grid,
                   const Matrix& cond, const std::optional<DropoutSpec>& dropout, Matrix& state,
                   Matrix& ldj_channel, RowVector& ldj_shared, FlowTape::Block* tb) {
  if (tb) tb->actnorm_in = state;

  // ActNorm
  for (Eigen::Index c = 0; c < 2; ++c) {
    state.row(c) = (state.row(c).array() + b.bias[c]) * std::exp(b.log_scale[c]);
    ldj_channel.row(c).array() += b.log_scale[c];
  }
  if (tb) tb->mix_in = state;

  // Invertible 1x1 channel mix
  Matrix mixed = b.mix * state;
  ldj_shared.array() += std::log(std::abs(b.mix.determinant()));

  // Affine coupling: channel 0 conditions channel 1.
  Matrix sub_in = subnet_input(mixed.topRows(1), cond);
  Matrix h1 = conv_forward(b.in_conv, grid, sub_in);
  sigmoid_inplace(h1);
  Matrix h2 = conv_forward(b.mid_conv, grid, h1);
  sigmoid_inplace(h2);
  Matrix mask;
  Matrix h2d;
  if (dropout && dropout->rate > 0.0) {
    mask = dropout_mask(*dropout, index, h2.rows(), h2.cols());
    h2d = h2.cwiseProduct(mask);
  } else {
    h2d = h2;
  }
  const Matrix rt = conv_forward(b.out_conv, grid, h2d);

  const Eigen::Index n = state.cols();
  state.resize(2, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    const double r = rt(0, p);
    const double coupled = mixed(1, p) * sigmoid(-r) + rt(1, p);
    state(0, p) = coupled;
    state(1, p) = mixed(0, p);
    // Coupling log-det lands on channel 1, then the channels swap.
    const double carried = ldj_channel(0, p);
    ldj_channel(0, p) = ldj_channel(1, p) - softplus(r);
    ldj_channel(1, p) = carried;
  }
  check_finite(state, index);

  if (tb) {
    tb->mixed = std::move(mixed);
    tb->subnet_in = std::move(sub_in);
    tb->h1 = std::move(h1);
    tb->h2 = std::move(h2);
    tb->mask = std::move(mask);
    tb->h2_dropped = std::move(h2d);
    tb->r = rt.row(0);
  }
}

FlowOutput run_forward(const FlowParams& params, const PixelGrid& grid, const Matrix& z,
                       const Matrix& cond, const std::optional<DropoutSpec>& dropout,
                       FlowTape* tape) {
  check_inputs(params, grid, z, cond);
  if (!z.allFinite()) throw NumericError("non-finite flow input");
  const auto n = static_cast<Eigen::Index>(grid.pixels());
  FlowOutput out{z, Matrix::Zero(2, n), RowVector::Zero(n)};
  if (tape) {
    tape->grid = grid;
    tape->blocks.assign(params.blocks.size(), {});
  }
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    block_forward(params.blocks[l], l, grid, cond, dropout, out.u, out.ldj_channel,
                  out.ldj_shared, tape ? &tape->blocks[l] : nullptr);
  }
  return out;
}

}  // namespace

void FlowConfig::validate() const {
  if (blocks == 0 || blocks % 2 != 0) {
    throw ConfigError("number of flow blocks L must be even and positive, got " + std::to_string(blocks));
  }
  if (kernel % 2 == 0) throw ConfigError("kernel size K must be odd, got " + std::to_string(kernel));
  if (hidden == 0) throw ConfigError("hidden_width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
}

FlowParams FlowParams::zeros(const FlowConfig& config) {
  FlowParams p;
  p.config = config;
  p.blocks.resize(config.blocks);
  for (auto& b : p.blocks) {
    b.mix = Matrix2::Zero();
    b.in_conv = Conv2d::zeros(1 + config.cond_channels, config.hidden, 1);
    b.mid_conv = Conv2d::zeros(config.hidden, config.hidden, config.kernel);
    b.out_conv = Conv2d::zeros(config.hidden, 2, 1);
  }
  return p;
}

FlowParams init_flow(const FlowConfig& config, std::mt19937_64& rng) {
  config.validate();
  FlowParams p = FlowParams::zeros(config);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (auto& b : p.blocks) {
    const double a = angle(rng);
    b.mix << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    b.in_conv = Conv2d::uniform_init(1 + config.cond_channels, config.hidden, 1, rng);
    b.mid_conv = Conv2d::uniform_init(config.hidden, config.hidden, config.kernel, rng);
    b.out_conv = Conv2d::zeros(config.hidden, 2, 1);
  }
  return p;
}

FlowOutput flow_forward(const FlowParams& params, const PixelGrid& grid, const Matrix& z,
                        const Matrix& cond, const std::optional<DropoutSpec>& dropout) {
  return run_forward(params, grid, z, cond, dropout, nullptr);
}

FlowOutput flow_forward_taped(const FlowParams& params, const PixelGrid& grid, const Matrix& z,
                              const Matrix& cond, const std::optional<DropoutSpec>& dropout,
                              FlowTape& tape) {
  return run_forward(params, grid, z, cond, dropout, &tape);
}

Matrix flow_inverse(const FlowParams& params, const PixelGrid& grid, const Matrix& u,
                    const Matrix& cond) {
  check_inputs(params, grid, u, cond);
  Matrix state = u;
  const Eigen::Index n = state.cols();
  for (std::size_t l = params.blocks.size(); l-- > 0;) {
    const FlowBlock& b = params.blocks[l];
    const double det = b.mix.determinant();
    if (det == 0.0 || !std::isfinite(det)) {
      throw NumericError("singular channel-mixing matrix in flow block " + std::to_string(l));
    }
    // Undo the swap: row 1 is the untouched conditioner, row 0 the coupled channel.
    Matrix mixed(2, n);
    mixed.row(0) = state.row(1);
    Matrix h1 = conv_forward(b.in_conv, grid, subnet_input(mixed.topRows(1), cond));
    sigmoid_inplace(h1);
    Matrix h2 = conv_forward(b.mid_conv, grid, h1);
    sigmoid_inplace(h2);
    const Matrix rt = conv_forward(b.out_conv, grid, h2);
    for (Eigen::Index p = 0; p < n; ++p) {
      mixed(1, p) = (state(0, p) - rt(1, p)) / sigmoid(-rt(0, p));
    }
    state = b.mix.inverse() * mixed;
    for (Eigen::Index c = 0; c < 2; ++c) {
      state.row(c) = state.row(c).array() * std::exp(-b.log_scale[c]) - b.bias[c];
    }
    check_finite(state, l);
  }
  return state;
}

FlowParams init_actnorm(const FlowParams& params, const PixelGrid& grid, const Matrix& z,
                        const Matrix& cond) {
  check_inputs(params, grid, z, cond);
  if (grid.pixels() == 0) throw ConfigError("ActNorm initialization needs a non-empty batch");
  FlowParams out = params;
  Matrix state = z;
  Matrix ldj_channel = Matrix::Zero(2, z.cols());
  RowVector ldj_shared = RowVector::Zero(z.cols());
  const auto n = static_cast<double>(z.cols());
  for (std::size_t l = 0; l < out.blocks.size(); ++l) {
    FlowBlock& b = out.blocks[l];
    for (Eigen::Index c = 0; c < 2; ++c) {
      const double mean = state.row(c).sum() / n;
      const double var = (state.row(c).array() - mean).square().sum() / n;
      b.bias[c] = -mean;
      b.log_scale[c] = -std::log(std::sqrt(var) + 1e-6);
    }
    block_forward(b, l, grid, cond, std::nullopt, state, ldj_channel, ldj_shared, nullptr);
  }
  return out;
}

Matrix flow_backward(const FlowParams& params, const FlowTape& tape, const Matrix& grad_u,
                     const Matrix& grad_ldj_channel, const RowVector& grad_ldj_shared,
                     FlowParams& grad) {
  const PixelGrid& grid = tape.grid;
  Matrix g_state = grad_u;
  Matrix g_ldj = grad_ldj_channel;
  const double g_shared_total = grad_ldj_shared.sum();
  const Eigen::Index n = g_state.cols();

  for (std::size_t l = params.blocks.size(); l-- > 0;) {
    const FlowBlock& b = params.blocks[l];
    const FlowTape::Block& tb = tape.blocks[l];
    FlowBlock& gb = grad.blocks[l];

    // Undo the swap for both the state and the log-det gradients.
    g_ldj.row(0).swap(g_ldj.row(1));
    Matrix g_mixed(2, n);
    Matrix g_out(2, n);  // d/dr, d/dt
    for (Eigen::Index p = 0; p < n; ++p) {
      const double g_coupled = g_state(0, p);
      const double s = sigmoid(-tb.r[p]);  // coupling scale
      g_mixed(0, p) = g_state(1, p);
      g_mixed(1, p) = g_coupled * s;
      // d/dr [x s + t] = -x s (1 - s);  d/dr [-softplus(r)] = -(1 - s)
      g_out(0, p) = -g_coupled * tb.mixed(1, p) * s * (1.0 - s) - g_ldj(1, p) * (1.0 - s);
      g_out(1, p) = g_coupled;
    }

    Matrix g_h2 = conv_backward(b.out_conv, grid, tb.h2_dropped, g_out, gb.out_conv);
    if (tb.mask.size() > 0) g_h2.array() *= tb.mask.array();
    g_h2.array() *= tb.h2.array() * (1.0 - tb.h2.array());
    Matrix g_h1 = conv_backward(b.mid_conv, grid, tb.h1, g_h2, gb.mid_conv);
    g_h1.array() *= tb.h1.array() * (1.0 - tb.h1.array());
    const Matrix g_sub = conv_backward(b.in_conv, grid, tb.subnet_in, g_h1, gb.in_conv);
    g_mixed.row(0) += g_sub.row(0);

    // Channel mix: mixed = W x, plus log|det W| per pixel.
    gb.mix.noalias() += g_mixed * tb.mix_in.transpose();
    gb.mix += g_shared_total * b.mix.inverse().transpose();
    const Matrix g_act = b.mix.transpose() * g_mixed;

    // ActNorm: y = exp(w) (x + b), log-det w per pixel on channel c.
    g_state.resize(2, n);
    for (Eigen::Index c = 0; c < 2; ++c) {
      const double scale = std::exp(b.log_scale[c]);
      gb.log_scale[c] += g_act.row(c).dot(tb.mix_in.row(c)) + g_ldj.row(c).sum();
      gb.bias[c] += scale * g_act.row(c).sum();
      g_state.row(c) = scale * g_act.row(c);
    }
  }
  return g_state;
}

}  // namespace fed
