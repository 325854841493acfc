// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// Maximum-likelihood training: the two-class cross-entropy over class logits,
// its exact gradient, AdamW with linear warm-up and step decay, and the
// deterministic training loop.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fed/detector.hpp"

namespace fed {

struct TrainConfig {
  double lr_init = 1e-3;
  double lr_warmup_start = 1e-6;
  std::size_t warmup_iters = 4000;
  std::size_t decay_every = 15000;
  double decay_factor = 0.1;
  std::size_t total_iters = 50000;
  std::size_t batch_size = 4;
  double weight_decay = 0.01;
  std::size_t crop_height = 0;  // 0 = full image
  std::size_t crop_width = 0;
  std::uint64_t seed = 0;
  std::optional<double> grad_clip;  // global L2 norm
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

/// Linear warm-up from lr_warmup_start to lr_init over [0, warmup_iters),
/// then lr_init * decay_factor^floor(iter / decay_every).
double learning_rate(const TrainConfig& config, std::size_t iteration);

/// Mean over pixels of -log softmax(s)[m]; `labels` holds kPositive/kNegative.
double cross_entropy(const Matrix& class_logits, std::span<const std::int32_t> labels);

double detector_loss(const Detector& detector, const FeatureMaps& batch,
                     const std::optional<DropoutSpec>& dropout = {});

struct LossAndGrad {
  double loss = 0.0;
  Detector grad;
};

/// Exact reverse-mode gradient of detector_loss. A fixed DropoutSpec gives a
/// fixed mask, so the result is the derivative of the same function.
LossAndGrad loss_and_grad(const Detector& detector, const FeatureMaps& batch,
                          const std::optional<DropoutSpec>& dropout = {});

struct TrainState {
  Detector params;
  Detector first_moment;
  Detector second_moment;
  std::size_t step = 0;  // completed optimizer steps

  explicit TrainState(Detector initial);
};

/// One AdamW update with decoupled weight decay on the decay group.
void adamw_step(TrainState& state, Detector& grad, const TrainConfig& config, double lr);

struct LossRecord {
  std::size_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct FitResult {
  Detector detector;
  std::vector<LossRecord> log;
};

using ProgressFn = std::function<void(const LossRecord&)>;

/// Trains from `initial` on full-image feature maps (labels required).
/// ActNorm is initialized from the first batch before the first step.
/// Throws NumericError naming the iteration if the loss diverges.
FitResult fit(const std::vector<FeatureMaps>& dataset, Detector initial, const TrainConfig& config,
              const ProgressFn& progress = {});

std::string loss_log_csv(const std::vector<LossRecord>& log);

/// Crop of one single-image feature map.
FeatureMaps crop_features(const FeatureMaps& full, std::size_t y0, std::size_t x0,
                          std::size_t height, std::size_t width);

}  // namespace fed
