// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "fed/error.hpp"

namespace fed {
namespace {

void check_logits(const Tensor& logits) {
  if (logits.rank() != 3 || logits.dim(0) < 2) {
    throw ShapeError("logits must have shape (C >= 2, H, W), got " + shape_string(logits.shape));
  }
}

// Gathers the class column of pixel p; validates finiteness.
void gather(const Tensor& logits, std::size_t p, std::vector<double>& out) {
  const std::size_t c = logits.dim(0);
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  out.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    const double v = logits[k * plane + p];
    if (!std::isfinite(v)) {
      throw NumericError("non-finite logit at (class " + std::to_string(k) + ", y " +
                         std::to_string(p / logits.dim(2)) + ", x " +
                         std::to_string(p % logits.dim(2)) + ")");
    }
    out[k] = v;
  }
}

}  // namespace

double logsumexp(std::span<const double> values) {
  const double top = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

double log1mexp(double x) {
  if (x > -std::numbers::ln2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

Tensor free_energy(const Tensor& logits) {
  check_logits(logits);
  const std::size_t h = logits.dim(1), w = logits.dim(2);
  Tensor out({h, w});
  std::vector<double> column;
  for (std::size_t p = 0; p < h * w; ++p) {
    gather(logits, p, column);
    out[p] = logsumexp(column);
  }
  return out;
}

Tensor energy_pair(const Tensor& logits, double eps) {
  if (!(eps > 0.0)) throw ConfigError("energy_clamp_eps must be positive");
  const Tensor neg_energy = free_energy(logits);
  const std::size_t plane = neg_energy.size();
  Tensor z({2, logits.dim(1), logits.dim(2)});
  for (std::size_t p = 0; p < plane; ++p) {
    const double z1 = std::min(neg_energy[p], -eps);
    z[p] = z1;
    z[plane + p] = log1mexp(z1);
  }
  return z;
}

Tensor pool_condition(const Tensor& embeddings, std::size_t pooled) {
  if (embeddings.rank() != 3) {
    throw ShapeError("embeddings must have shape (V, H, W), got " + shape_string(embeddings.shape));
  }
  const std::size_t v = embeddings.dim(0);
  const std::size_t plane = embeddings.dim(1) * embeddings.dim(2);
  Tensor out({pooled, embeddings.dim(1), embeddings.dim(2)});
  if (pooled == 0) return out;
  if (pooled > v || v % pooled != 0) {
    throw ConfigError("condition width P = " + std::to_string(pooled) +
                      " must divide the embedding width V = " + std::to_string(v));
  }
  const std::size_t group = v / pooled;
  for (std::size_t g = 0; g < pooled; ++g) {
    double* dst = out.data.data() + g * plane;
    for (std::size_t k = g * group; k < (g + 1) * group; ++k) {
      const double* src = embeddings.data.data() + k * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += src[p];
    }
    for (std::size_t p = 0; p < plane; ++p) dst[p] /= static_cast<double>(group);
  }
  return out;
}

LabelMap argmax_labels(const Tensor& logits) {
  check_logits(logits);
  const std::size_t c = logits.dim(0);
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  LabelMap out({logits.dim(1), logits.dim(2)});
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k) {
      if (logits[k * plane + p] > logits[best * plane + p]) best = k;
    }
    out[p] = static_cast<std::int32_t>(best);
  }
  return out;
}

VoidRole parse_void_role(std::string_view name) {
  if (name == "ood_class") return VoidRole::kOodClass;
  if (name == "ignore") return VoidRole::kIgnore;
  throw ConfigError("unknown void role '" + std::string(name) + "' (expected ood_class or ignore)");
}

PixelLabelMap binary_labels(const Tensor& logits, const LabelMap& labels, VoidRole role) {
  const LabelMap pred = argmax_labels(logits);
  if (labels.shape != pred.shape) {
    throw ShapeError("labels shape " + shape_string(labels.shape) +
                     " does not match logits spatial shape " + shape_string(pred.shape));
  }
  PixelLabelMap out{LabelMap(labels.shape), NdArray<std::uint8_t>(labels.shape, 1)};
  for (std::size_t p = 0; p < labels.size(); ++p) {
    out.m[p] = labels[p] == pred[p] ? kPositive : kNegative;
    if (role == VoidRole::kIgnore && labels[p] == kVoidLabel) out.valid[p] = 0;
  }
  return out;
}

BaselineKind parse_baseline(std::string_view name) {
  if (name == "msp") return BaselineKind::kMsp;
  if (name == "mlg") return BaselineKind::kMlg;
  if (name == "ene") return BaselineKind::kEne;
  throw ConfigError("unknown baseline '" + std::string(name) + "' (expected msp, mlg or ene)");
}

Tensor baseline_scores(const Tensor& logits, BaselineKind kind) {
  check_logits(logits);
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  Tensor out({logits.dim(1), logits.dim(2)});
  std::vector<double> column;
  for (std::size_t p = 0; p < plane; ++p) {
    gather(logits, p, column);
    const double top = *std::max_element(column.begin(), column.end());
    switch (kind) {
      case BaselineKind::kMsp: {
        // max softmax = 1 / sum(exp(x - max))
        double sum = 0.0;
        for (double v : column) sum += std::exp(v - top);
        out[p] = 1.0 - 1.0 / sum;
        break;
      }
      case BaselineKind::kMlg:
        out[p] = -top;
        break;
      case BaselineKind::kEne:
        out[p] = -logsumexp(column);
        break;
    }
  }
  return out;
}

}  // namespace fed
