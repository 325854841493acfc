// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// Per-pixel features derived from a frozen segmentation model: free energy,
// the two-channel energy input of the flow, pooled condition maps, binary
// correct/incorrect labels, and the softmax/logit/energy baseline scores.

#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "fed/array.hpp"

namespace fed {

inline constexpr double kDefaultEnergyClampEps = 1e-6;

/// max + log(sum(exp(x - max))). Requires a non-empty span.
double logsumexp(std::span<const double> values);

/// log(1 - exp(x)) for x < 0, switching between log(-expm1(x)) and
/// log1p(-exp(x)) at -ln 2.
double log1mexp(double x);

/// Negative free energy -E(x) = logsumexp over the class axis. Output H x W.
/// Throws NumericError naming the pixel for non-finite logits.
Tensor free_energy(const Tensor& logits);

/// Flow input z (2 x H x W): z1 = min(-E, -eps), z2 = log1mexp(z1).
Tensor energy_pair(const Tensor& logits, double eps = kDefaultEnergyClampEps);

/// Contiguous-group channel means: V x H x W -> P x H x W. P = 0 yields an
/// empty 0 x H x W map. Throws ConfigError unless P divides V.
Tensor pool_condition(const Tensor& embeddings, std::size_t pooled_channels);

/// Argmax over the class axis; the lowest class index wins ties.
LabelMap argmax_labels(const Tensor& logits);

enum class VoidRole { kOodClass, kIgnore };
VoidRole parse_void_role(std::string_view name);

inline constexpr std::int32_t kPositive = 1;
inline constexpr std::int32_t kNegative = 2;

struct PixelLabelMap {
  LabelMap m;                     // kPositive where y == argmax, else kNegative
  NdArray<std::uint8_t> valid;    // 0 where the pixel is ignored at metric time
};

/// Void (255) ground truth is always a negative; `role` only decides whether
/// void pixels stay valid for evaluation.
PixelLabelMap binary_labels(const Tensor& logits, const LabelMap& labels,
                            VoidRole role = VoidRole::kOodClass);

enum class BaselineKind { kMsp, kMlg, kEne };
BaselineKind parse_baseline(std::string_view name);

/// Higher is more uncertain: msp = 1 - max softmax, mlg = -max logit,
/// ene = E(x) = -logsumexp(logits).
Tensor baseline_scores(const Tensor& logits, BaselineKind kind);

}  // namespace fed
