// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "fed/error.hpp"
#include "fed/numeric.hpp"

namespace fed {
namespace {

// Gradients of the mean cross-entropy with respect to the class logits.
double cross_entropy_with_grad(const Matrix& s, std::span<const std::int32_t> labels, Matrix* grad) {
  const Eigen::Index n = s.cols();
  if (n == 0) throw ConfigError("loss over an empty batch");
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw ShapeError("label count " + std::to_string(labels.size()) + " does not match " +
                     std::to_string(n) + " pixels");
  }
  if (grad) grad->resize(2, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index p = 0; p < n; ++p) {
    const std::int32_t m = labels[static_cast<std::size_t>(p)];
    if (m != kPositive && m != kNegative) {
      throw ConfigError("pixel label must be 1 or 2, got " + std::to_string(m));
    }
    const double top = std::max(s(0, p), s(1, p));
    const double lse = top + std::log(std::exp(s(0, p) - top) + std::exp(s(1, p) - top));
    total += lse - s(m - 1, p);
    if (grad) {
      const double p2 = sigmoid(s(1, p) - s(0, p));
      (*grad)(0, p) = ((1.0 - p2) - (m == kPositive ? 1.0 : 0.0)) * inv_n;
      (*grad)(1, p) = (p2 - (m == kNegative ? 1.0 : 0.0)) * inv_n;
    }
  }
  return total * inv_n;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t iteration) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ull + iteration + 0x632be59bd9b4e019ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr_init > 0.0) || !(lr_warmup_start > 0.0)) throw ConfigError("learning rates must be positive");
  if (warmup_iters >= total_iters) {
    throw ConfigError("warmup_iters (" + std::to_string(warmup_iters) +
                      ") must be smaller than total_iters (" + std::to_string(total_iters) + ")");
  }
  if (decay_every == 0) throw ConfigError("decay_every must be positive");
  if (!(decay_factor > 0.0)) throw ConfigError("decay_factor must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if ((crop_height == 0) != (crop_width == 0)) throw ConfigError("crop needs both height and width");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
}

double learning_rate(const TrainConfig& c, std::size_t iteration) {
  if (iteration < c.warmup_iters) {
    return c.lr_warmup_start + (c.lr_init - c.lr_warmup_start) * static_cast<double>(iteration) /
                                   static_cast<double>(c.warmup_iters);
  }
  const auto steps = static_cast<int>(iteration / c.decay_every);
  return c.lr_init * std::pow(c.decay_factor, steps);
}

double cross_entropy(const Matrix& class_logits, std::span<const std::int32_t> labels) {
  return cross_entropy_with_grad(class_logits, labels, nullptr);
}

double detector_loss(const Detector& detector, const FeatureMaps& batch,
                     const std::optional<DropoutSpec>& dropout) {
  const FlowOutput out = flow_forward(detector.flow, batch.grid, batch.z, batch.cond, dropout);
  return cross_entropy(class_logits(out, detector.density), batch.labels);
}

LossAndGrad loss_and_grad(const Detector& detector, const FeatureMaps& batch,
                          const std::optional<DropoutSpec>& dropout) {
  FlowTape tape;
  const FlowOutput out =
      flow_forward_taped(detector.flow, batch.grid, batch.z, batch.cond, dropout, tape);
  const Matrix s = class_logits(out, detector.density);
  Matrix g_s;
  LossAndGrad result{cross_entropy_with_grad(s, batch.labels, &g_s), detector.zeros_like()};
  DensityParams& gd = result.grad.density;
  const DensityParams& dp = detector.density;

  // log beta_m
  for (int m = 0; m < 2; ++m) {
    gd.raw_beta[m] = g_s.row(m).sum() * sigmoid(dp.raw_beta[m]) / softplus(dp.raw_beta[m]);
  }

  // l_1 = log d1 - (d1 v1 + o v2)^2 / 2,  l_2 = log d2 - (d2 v2)^2 / 2
  const Vector2 d = dp.diag();
  const double o = dp.mode == CovMode::kFull ? dp.offdiag : 0.0;
  const Eigen::Index n = s.cols();
  Matrix g_u(2, n);
  double g_d0 = 0.0, g_d1 = 0.0, g_o = 0.0;
  for (Eigen::Index p = 0; p < n; ++p) {
    const double v0 = out.u(0, p) - dp.mean[0];
    const double v1 = out.u(1, p) - dp.mean[1];
    const double q0 = d[0] * v0 + o * v1;
    const double q1 = d[1] * v1;
    const double a = g_s(0, p);
    const double b = g_s(1, p);
    g_d0 += a * (1.0 / d[0] - q0 * v0);
    g_d1 += b * (1.0 / d[1] - q1 * v1);
    g_o += -a * q0 * v1;
    g_u(0, p) = -a * q0 * d[0];
    g_u(1, p) = -a * q0 * o - b * q1 * d[1];
  }
  gd.raw_diag[0] = g_d0 * sigmoid(dp.raw_diag[0]);
  gd.raw_diag[1] = g_d1 * sigmoid(dp.raw_diag[1]);
  gd.offdiag = dp.mode == CovMode::kFull ? g_o : 0.0;
  gd.mean = -g_u.rowwise().sum();

  // Default equal split of the shared log-det.
  const RowVector g_shared = 0.5 * (g_s.row(0) + g_s.row(1));
  flow_backward(detector.flow, tape, g_u, g_s, g_shared, result.grad.flow);

  for (const ParamRef& ref : parameter_refs(result.grad)) {
    for (double v : ref.values) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in parameter '" + ref.name + "'");
    }
  }
  return result;
}

TrainState::TrainState(Detector initial)
    : params(std::move(initial)),
      first_moment(params.zeros_like()),
      second_moment(params.zeros_like()) {}

void adamw_step(TrainState& state, Detector& grad, const TrainConfig& config, double lr) {
  auto params = parameter_refs(state.params);
  auto grads = parameter_refs(grad);
  auto m1 = parameter_refs(state.first_moment);
  auto m2 = parameter_refs(state.second_moment);

  if (config.grad_clip) {
    double sq = 0.0;
    for (const auto& g : grads)
      for (double v : g.values) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > *config.grad_clip) {
      const double scale = *config.grad_clip / norm;
      for (auto& g : grads)
        for (double& v : g.values) v *= scale;
    }
  }

  ++state.step;
  const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const bool decay = params[i].weight_decay && config.weight_decay > 0.0;
    for (std::size_t k = 0; k < params[i].values.size(); ++k) {
      double& p = params[i].values[k];
      const double g = grads[i].values[k];
      double& m = m1[i].values[k];
      double& v = m2[i].values[k];
      if (decay) p *= 1.0 - lr * config.weight_decay;
      m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
      v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * g * g;
      p -= lr * (m / bias1) / (std::sqrt(v / bias2) + config.adam_eps);
    }
  }
  if (state.params.density.mode == CovMode::kDiag) state.params.density.offdiag = 0.0;
}

FeatureMaps crop_features(const FeatureMaps& full, std::size_t y0, std::size_t x0,
                          std::size_t height, std::size_t width) {
  if (full.grid.images != 1) throw ShapeError("crop_features expects a single image");
  if (y0 + height > full.grid.height || x0 + width > full.grid.width) {
    throw ShapeError("crop exceeds image bounds");
  }
  FeatureMaps out;
  out.grid = {1, height, width};
  const auto n = static_cast<Eigen::Index>(height * width);
  out.z.resize(2, n);
  out.cond.resize(full.cond.rows(), n);
  if (!full.labels.empty()) out.labels.resize(height * width);
  for (std::size_t y = 0; y < height; ++y) {
    const auto src = static_cast<Eigen::Index>((y0 + y) * full.grid.width + x0);
    const auto dst = static_cast<Eigen::Index>(y * width);
    const auto w = static_cast<Eigen::Index>(width);
    out.z.middleCols(dst, w) = full.z.middleCols(src, w);
    if (out.cond.rows() > 0) out.cond.middleCols(dst, w) = full.cond.middleCols(src, w);
    if (!full.labels.empty()) {
      std::copy_n(full.labels.begin() + src, width, out.labels.begin() + dst);
    }
  }
  return out;
}

FitResult fit(const std::vector<FeatureMaps>& dataset, Detector initial, const TrainConfig& config,
              const ProgressFn& progress) {
  config.validate();
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  for (const auto& f : dataset) {
    if (f.labels.empty()) throw ConfigError("training samples need labels");
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  auto next_batch = [&]() {
    std::vector<FeatureMaps> crops;
    crops.reserve(config.batch_size);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const FeatureMaps& f = dataset[order[cursor++]];
      if (config.crop_height == 0 || (config.crop_height >= f.grid.height && config.crop_width >= f.grid.width)) {
        crops.push_back(f);
        continue;
      }
      const std::size_t ch = std::min(config.crop_height, f.grid.height);
      const std::size_t cw = std::min(config.crop_width, f.grid.width);
      std::uniform_int_distribution<std::size_t> ys(0, f.grid.height - ch);
      std::uniform_int_distribution<std::size_t> xs(0, f.grid.width - cw);
      const std::size_t y0 = ys(rng);
      const std::size_t x0 = xs(rng);
      crops.push_back(crop_features(f, y0, x0, ch, cw));
    }
    std::vector<const FeatureMaps*> parts;
    for (const auto& c : crops) parts.push_back(&c);
    return concat_features(parts);
  };

  FitResult result{std::move(initial), {}};
  FeatureMaps batch = next_batch();
  result.detector.flow = init_actnorm(result.detector.flow, batch.grid, batch.z, batch.cond);

  TrainState state(std::move(result.detector));
  result.log.reserve(config.total_iters);
  for (std::size_t it = 0; it < config.total_iters; ++it) {
    if (it > 0) batch = next_batch();
    const double lr = learning_rate(config, it);
    std::optional<DropoutSpec> dropout;
    if (state.params.config().dropout > 0.0) {
      dropout = DropoutSpec{state.params.config().dropout, mix_seed(config.seed, it)};
    }
    LossAndGrad lg;
    try {
      lg = loss_and_grad(state.params, batch, dropout);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    if (!std::isfinite(lg.loss)) {
      throw NumericError("training diverged at iteration " + std::to_string(it) + ": loss is not finite");
    }
    adamw_step(state, lg.grad, config, lr);
    result.log.push_back({it, lr, lg.loss});
    if (progress) progress(result.log.back());
  }
  result.detector = std::move(state.params);
  return result;
}

std::string loss_log_csv(const std::vector<LossRecord>& log) {
  std::string out = "iteration,lr,loss\n";
  char line[96];
  for (const auto& r : log) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", r.iteration, r.lr, r.loss);
    out += line;
  }
  return out;
}

}  // namespace fed
