// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>

#include "fed/linalg.hpp"

namespace fed {

/// Square-kernel 2D convolution, stride 1, zero padding kernel/2.
/// `weight` is out x (in * k * k), i.e. the C-order (out, in, k, k) tensor.
struct Conv2d {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 1;
  Matrix weight;
  Eigen::VectorXd bias;

  static Conv2d zeros(std::size_t in, std::size_t out, std::size_t kernel);
  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and bias.
  static Conv2d uniform_init(std::size_t in, std::size_t out, std::size_t kernel,
                             std::mt19937_64& rng);
};

Matrix conv_forward(const Conv2d& conv, const PixelGrid& grid, const Matrix& input);

/// Accumulates dL/dweight and dL/dbias into `grad` and returns dL/dinput
/// (an empty matrix when `want_input_grad` is false).
Matrix conv_backward(const Conv2d& conv, const PixelGrid& grid, const Matrix& input,
                     const Matrix& grad_output, Conv2d& grad, bool want_input_grad = true);

}  // namespace fed
