// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// L-block two-channel Glow-style flow. Each block applies
//   ActNorm -> invertible 2x2 channel mix -> conditional affine coupling
//   -> channel swap,
// and tracks log|det J| split into per-channel terms (ActNorm scales and
// coupling scales, permuted with the swaps) and a shared term (the mixing
// determinants).

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "fed/conv2d.hpp"
#include "fed/linalg.hpp"

namespace fed {

struct FlowConfig {
  std::size_t blocks = 8;         // L, must be even
  std::size_t cond_channels = 0;  // P, 0 = unconditional
  std::size_t kernel = 7;         // K, odd
  std::size_t hidden = 32;
  double dropout = 0.2;

  /// Throws ConfigError on odd L, even K, zero hidden width or a dropout
  /// rate outside [0, 1).
  void validate() const;
};

struct FlowBlock {
  Vector2 log_scale = Vector2::Zero();  // ActNorm w
  Vector2 bias = Vector2::Zero();       // ActNorm b
  Matrix2 mix = Matrix2::Identity();
  Conv2d in_conv;   // 1x1, (1 + P) -> hidden
  Conv2d mid_conv;  // KxK, hidden -> hidden
  Conv2d out_conv;  // 1x1, hidden -> 2 (r, t)
};

struct FlowParams {
  FlowConfig config;
  std::vector<FlowBlock> blocks;

  /// All-zero parameters (including the mixing matrices); used as gradient
  /// accumulators and optimizer moments.
  static FlowParams zeros(const FlowConfig& config);
};

/// Identity ActNorm, random rotation mixes, uniform fan-in subnet weights,
/// zeroed final subnet layer.
FlowParams init_flow(const FlowConfig& config, std::mt19937_64& rng);

struct FlowOutput {
  Matrix u;            // 2 x N
  Matrix ldj_channel;  // 2 x N
  RowVector ldj_shared;  // N

  RowVector total_ldj() const { return ldj_channel.colwise().sum() + ldj_shared; }
};

/// Inverted dropout on the subnet's last hidden activation. The mask is a
/// pure function of (seed, block index, element index).
struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

/// `cond` has P rows (zero rows when P = 0). Throws NumericError naming the
/// block when an intermediate value becomes non-finite.
FlowOutput flow_forward(const FlowParams& params, const PixelGrid& grid, const Matrix& z,
                        const Matrix& cond, const std::optional<DropoutSpec>& dropout = {});

/// Undoes flow_forward (dropout off). Throws NumericError on a singular mix.
Matrix flow_inverse(const FlowParams& params, const PixelGrid& grid, const Matrix& u,
                    const Matrix& cond);

/// Data-dependent ActNorm initialization, block by block: b = -mean,
/// w = -log(std + 1e-6) of the block's pre-ActNorm activations.
FlowParams init_actnorm(const FlowParams& params, const PixelGrid& grid, const Matrix& z,
                        const Matrix& cond);

/// Intermediate values kept for the backward pass.
struct FlowTape {
  struct Block {
    Matrix actnorm_in;  // 2 x N
    Matrix mix_in;      // 2 x N
    Matrix mixed;       // 2 x N
    Matrix subnet_in;   // (1 + P) x N
    Matrix h1;          // hidden x N, after sigmoid
    Matrix h2;          // hidden x N, after sigmoid
    Matrix mask;        // hidden x N, empty without dropout
    Matrix h2_dropped;
    RowVector r;
  };
  PixelGrid grid;
  std::vector<Block> blocks;
};

FlowOutput flow_forward_taped(const FlowParams& params, const PixelGrid& grid, const Matrix& z,
                              const Matrix& cond, const std::optional<DropoutSpec>& dropout,
                              FlowTape& tape);

/// Reverse-mode pass. Accumulates parameter gradients into `grad` and
/// returns dL/dz.
Matrix flow_backward(const FlowParams& params, const FlowTape& tape, const Matrix& grad_u,
                     const Matrix& grad_ldj_channel, const RowVector& grad_ldj_shared,
                     FlowParams& grad);

}  // namespace fed
