// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cstddef>

namespace fed {

/// Channel-major activations: one row per channel, one column per pixel.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Matrix2 = Eigen::Matrix<double, 2, 2, Eigen::RowMajor>;
using Vector2 = Eigen::Vector2d;

/// A batch of equally sized images laid out image-major inside each row.
struct PixelGrid {
  std::size_t images = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t plane() const { return height * width; }
  std::size_t pixels() const { return images * height * width; }
  friend bool operator==(const PixelGrid&, const PixelGrid&) = default;
};

}  // namespace fed
