// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations used by the unit tests and the
// acceptance suite. Nothing here calls the library routine it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "fed/detector.hpp"
#include "fed/flow.hpp"
#include "fed/train.hpp"

namespace fed::oracle {

inline std::vector<double> distinct_desc(const std::vector<double>& scores) {
  std::set<double, std::greater<>> s(scores.begin(), scores.end());
  return {s.begin(), s.end()};
}

struct Counts {
  std::int64_t tp = 0, fp = 0;
};

inline Counts detections(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth,
                         double t) {
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= t) ++(truth[i] ? c.tp : c.fp);
  }
  return c;
}

inline std::int64_t count_truth(const std::vector<std::uint8_t>& truth) {
  return std::count(truth.begin(), truth.end(), std::uint8_t{1});
}

/// All positive/negative pairs, ties worth one half.
inline double auroc_pairs(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
  long double wins = 0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) wins += 0.5L;
    }
  }
  return static_cast<double>(wins / pairs);
}

inline double ap_sweep(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
  const auto pos = static_cast<long double>(count_truth(truth));
  long double ap = 0, prev_recall = 0;
  for (double t : distinct_desc(scores)) {
    const Counts c = detections(scores, truth, t);
    const long double recall = c.tp / pos;
    const long double precision = static_cast<long double>(c.tp) / (c.tp + c.fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return static_cast<double>(ap);
}

inline double fpr95_sweep(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
  const std::int64_t pos = count_truth(truth);
  const auto neg = static_cast<std::int64_t>(truth.size()) - pos;
  for (double t : distinct_desc(scores)) {
    const Counts c = detections(scores, truth, t);
    if (c.tp * 20 >= pos * 19) return static_cast<double>(c.fp) / static_cast<double>(neg);
  }
  return 1.0;
}

struct F1Point {
  double threshold;
  double f1;
};

inline F1Point f1_sweep(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
  const std::int64_t pos = count_truth(truth);
  F1Point best{std::numeric_limits<double>::quiet_NaN(), -1.0};
  // Ascending thresholds with >= keeps the largest among equal F1 values.
  auto ts = distinct_desc(scores);
  std::reverse(ts.begin(), ts.end());
  std::int64_t best_num = -1, best_den = 1;
  for (double t : ts) {
    const Counts c = detections(scores, truth, t);
    const std::int64_t num = 2 * c.tp, den = 2 * c.tp + c.fp + (pos - c.tp);
    if (best_num < 0 || num * best_den >= best_num * den) {
      best_num = num;
      best_den = den;
      best.threshold = t;
    }
  }
  best.f1 = best_den == 0 ? 0.0 : static_cast<double>(best_num) / static_cast<double>(best_den);
  return best;
}

/// Dense bivariate normal log-density with precision U^T U.
inline double gaussian_logpdf(const Eigen::Vector2d& u, const Eigen::Vector2d& mean,
                              const Eigen::Matrix2d& upper) {
  const Eigen::Matrix2d precision = upper.transpose() * upper;
  const Eigen::Matrix2d cov = precision.inverse();
  const Eigen::Vector2d d = u - mean;
  return -0.5 * d.dot(cov.inverse() * d) - 0.5 * std::log(cov.determinant()) -
         std::log(2.0 * M_PI);
}

/// Central-difference Jacobian of a map R^n -> R^m.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd hi = x, lo = x;
    hi[k] += h;
    lo[k] -= h;
    j.col(k) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return j;
}

/// Randomizes every parameter of a detector so no gradient path is dead.
inline void randomize(Detector& d, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (ParamRef& p : parameter_refs(d)) {
    for (double& v : p.values) v = scale * normal(rng);
  }
  for (FlowBlock& b : d.flow.blocks) b.mix += Matrix2::Identity();
  if (d.density.mode == CovMode::kDiag) d.density.offdiag = 0.0;
}

struct GradMismatch {
  std::string name;
  std::size_t index;
  double analytic;
  double numeric;
};

/// Compares loss_and_grad against central differences of detector_loss.
/// Pass rule: |a - n| <= rel * max(|a|, |n|) or |a - n| <= abs_floor.
inline std::vector<GradMismatch> gradient_check(const Detector& det, const FeatureMaps& batch,
                                                const std::optional<DropoutSpec>& dropout,
                                                double h = 1e-5, double rel = 1e-4,
                                                double abs_floor = 1e-7,
                                                std::size_t* checked = nullptr,
                                                double* worst_rel = nullptr) {
  LossAndGrad lg = loss_and_grad(det, batch, dropout);
  Detector probe = det;
  std::vector<ParamRef> probe_refs = parameter_refs(probe);
  std::vector<ParamRef> grad_refs = parameter_refs(lg.grad);
  std::vector<GradMismatch> bad;
  std::size_t n = 0;
  for (std::size_t r = 0; r < probe_refs.size(); ++r) {
    for (std::size_t i = 0; i < probe_refs[r].values.size(); ++i) {
      double& v = probe_refs[r].values[i];
      const double saved = v;
      v = saved + h;
      const double up = detector_loss(probe, batch, dropout);
      v = saved - h;
      const double down = detector_loss(probe, batch, dropout);
      v = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grad_refs[r].values[i];
      const double diff = std::abs(analytic - numeric);
      ++n;
      if (worst_rel && std::max(std::abs(analytic), std::abs(numeric)) >= 1e-6)
        *worst_rel = std::max(*worst_rel, diff / std::max(std::abs(analytic), std::abs(numeric)));
      if (diff > rel * std::max(std::abs(analytic), std::abs(numeric)) && diff > abs_floor) {
        bad.push_back({probe_refs[r].name, i, analytic, numeric});
      }
    }
  }
  if (checked) *checked = n;
  return bad;
}

/// Random feature maps on an images x height x width grid, labels mixed.
inline FeatureMaps random_features(std::size_t images, std::size_t height, std::size_t width,
                                   std::size_t cond, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureMaps f;
  f.grid = PixelGrid{images, height, width};
  const std::size_t n = images * height * width;
  f.z = Matrix(2, static_cast<Eigen::Index>(n));
  f.cond = Matrix(static_cast<Eigen::Index>(cond), static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < f.z.cols(); ++j) {
    f.z(0, j) = -std::abs(normal(rng)) - 0.1;
    f.z(1, j) = std::log(-std::expm1(f.z(0, j)));
  }
  for (Eigen::Index k = 0; k < f.cond.size(); ++k) f.cond.data()[k] = normal(rng);
  for (std::size_t p = 0; p < n; ++p) f.labels.push_back(p % 3 == 0 ? kNegative : kPositive);
  return f;
}

}  // namespace fed::oracle
