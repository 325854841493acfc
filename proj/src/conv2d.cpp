// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/conv2d.hpp"

#include <algorithm>
#include <cmath>

namespace fed {
namespace {

// Only the centre tap sees data when the kernel is 1x1 or images are 1x1.
bool pointwise(const Conv2d& conv, const PixelGrid& grid) {
  return conv.kernel == 1 || (grid.height == 1 && grid.width == 1);
}

Matrix centre_taps(const Conv2d& conv) {
  const std::size_t kk = conv.kernel * conv.kernel;
  const std::size_t centre = (conv.kernel / 2) * conv.kernel + conv.kernel / 2;
  Matrix w(conv.out, conv.in);
  for (std::size_t o = 0; o < conv.out; ++o)
    for (std::size_t i = 0; i < conv.in; ++i) w(o, i) = conv.weight(o, i * kk + centre);
  return w;
}

// Bounds the column buffer to about 4M doubles for large images.
long band_rows(const Conv2d& conv, const PixelGrid& grid) {
  const std::size_t per_row = conv.in * conv.kernel * conv.kernel * grid.width;
  return static_cast<long>(std::max<std::size_t>(1, (std::size_t{1} << 22) / std::max<std::size_t>(per_row, 1)));
}

// Column buffer for rows [y0, y1) of image `img`: rows (c, ky, kx), columns
// the pixels of that band.
void im2col(const Conv2d& conv, const PixelGrid& grid, const Matrix& input, std::size_t img,
            long y0, long y1, Matrix& cols) {
  const long k = static_cast<long>(conv.kernel);
  const long pad = k / 2;
  const long h = static_cast<long>(grid.height);
  const long w = static_cast<long>(grid.width);
  const std::size_t offset = img * grid.plane();
  cols.resize(static_cast<Eigen::Index>(conv.in * conv.kernel * conv.kernel),
              static_cast<Eigen::Index>((y1 - y0) * w));
  for (std::size_t c = 0; c < conv.in; ++c) {
    const double* src = input.row(static_cast<Eigen::Index>(c)).data() + offset;
    for (long ky = 0; ky < k; ++ky) {
      for (long kx = 0; kx < k; ++kx) {
        double* dst = cols.row(static_cast<Eigen::Index>((c * conv.kernel + ky) * conv.kernel + kx)).data();
        const long dy = ky - pad;
        const long dx = kx - pad;
        for (long y = y0; y < y1; ++y) {
          const long sy = y + dy;
          double* row = dst + (y - y0) * w;
          if (sy < 0 || sy >= h) {
            std::fill(row, row + w, 0.0);
            continue;
          }
          std::fill(row, row + w, 0.0);
          const long x0 = std::max(0L, -dx);
          const long x1 = std::min(w, w - dx);
          for (long x = x0; x < x1; ++x) row[x] = src[sy * w + x + dx];
        }
      }
    }
  }
}

void col2im_add(const Conv2d& conv, const PixelGrid& grid, const Matrix& cols, std::size_t img,
                long y0, long y1, Matrix& grad_input) {
  const long k = static_cast<long>(conv.kernel);
  const long pad = k / 2;
  const long h = static_cast<long>(grid.height);
  const long w = static_cast<long>(grid.width);
  const std::size_t offset = img * grid.plane();
  for (std::size_t c = 0; c < conv.in; ++c) {
    double* dst = grad_input.row(static_cast<Eigen::Index>(c)).data() + offset;
    for (long ky = 0; ky < k; ++ky) {
      for (long kx = 0; kx < k; ++kx) {
        const double* src = cols.row(static_cast<Eigen::Index>((c * conv.kernel + ky) * conv.kernel + kx)).data();
        const long dy = ky - pad;
        const long dx = kx - pad;
        for (long y = y0; y < y1; ++y) {
          const long sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const long x0 = std::max(0L, -dx);
          const long x1 = std::min(w, w - dx);
          const double* srow = src + (y - y0) * w;
          for (long x = x0; x < x1; ++x) dst[sy * w + x + dx] += srow[x];
        }
      }
    }
  }
}

}  // namespace

Conv2d Conv2d::zeros(std::size_t in, std::size_t out, std::size_t kernel) {
  Conv2d c;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  c.weight = Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in * kernel * kernel));
  c.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
  return c;
}

Conv2d Conv2d::uniform_init(std::size_t in, std::size_t out, std::size_t kernel,
                            std::mt19937_64& rng) {
  Conv2d c = zeros(in, out, kernel);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel * kernel));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < c.weight.size(); ++i) c.weight.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < c.bias.size(); ++i) c.bias[i] = dist(rng);
  return c;
}

Matrix conv_forward(const Conv2d& conv, const PixelGrid& grid, const Matrix& input) {
  Matrix out(static_cast<Eigen::Index>(conv.out), input.cols());
  if (pointwise(conv, grid)) {
    if (conv.kernel == 1) {
      out.noalias() = conv.weight * input;
    } else {
      out.noalias() = centre_taps(conv) * input;
    }
  } else {
    Matrix cols;
    const auto plane = static_cast<Eigen::Index>(grid.plane());
    const long h = static_cast<long>(grid.height);
    const long w = static_cast<long>(grid.width);
    const long band = band_rows(conv, grid);
    for (std::size_t img = 0; img < grid.images; ++img) {
      for (long y0 = 0; y0 < h; y0 += band) {
        const long y1 = std::min(h, y0 + band);
        im2col(conv, grid, input, img, y0, y1, cols);
        out.middleCols(static_cast<Eigen::Index>(img) * plane + y0 * w, (y1 - y0) * w).noalias() =
            conv.weight * cols;
      }
    }
  }
  out.colwise() += conv.bias;
  return out;
}

Matrix conv_backward(const Conv2d& conv, const PixelGrid& grid, const Matrix& input,
                     const Matrix& grad_output, Conv2d& grad, bool want_input_grad) {
  grad.bias += grad_output.rowwise().sum();
  Matrix grad_input;
  if (pointwise(conv, grid)) {
    if (conv.kernel == 1) {
      grad.weight.noalias() += grad_output * input.transpose();
      if (want_input_grad) grad_input.noalias() = conv.weight.transpose() * grad_output;
    } else {
      const Matrix gw = grad_output * input.transpose();
      const std::size_t kk = conv.kernel * conv.kernel;
      const std::size_t centre = (conv.kernel / 2) * conv.kernel + conv.kernel / 2;
      for (std::size_t o = 0; o < conv.out; ++o)
        for (std::size_t i = 0; i < conv.in; ++i)
          grad.weight(o, i * kk + centre) += gw(o, i);
      if (want_input_grad) grad_input.noalias() = centre_taps(conv).transpose() * grad_output;
    }
    return grad_input;
  }

  if (want_input_grad) grad_input = Matrix::Zero(input.rows(), input.cols());
  Matrix cols;
  Matrix grad_cols;
  const auto plane = static_cast<Eigen::Index>(grid.plane());
  const long h = static_cast<long>(grid.height);
  const long w = static_cast<long>(grid.width);
  const long band = band_rows(conv, grid);
  for (std::size_t img = 0; img < grid.images; ++img) {
    for (long y0 = 0; y0 < h; y0 += band) {
      const long y1 = std::min(h, y0 + band);
      const auto g = grad_output.middleCols(static_cast<Eigen::Index>(img) * plane + y0 * w,
                                            (y1 - y0) * w);
      im2col(conv, grid, input, img, y0, y1, cols);
      grad.weight.noalias() += g * cols.transpose();
      if (want_input_grad) {
        grad_cols.noalias() = conv.weight.transpose() * g;
        col2im_add(conv, grid, grad_cols, img, y0, y1, grad_input);
      }
    }
  }
  return grad_input;
}

}  // namespace fed
