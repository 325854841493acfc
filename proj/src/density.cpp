// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/density.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fed/error.hpp"
#include "fed/numeric.hpp"

namespace fed {

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
}

CovMode parse_cov_mode(std::string_view name) {
  if (name == "full") return CovMode::kFull;
  if (name == "diag") return CovMode::kDiag;
  throw ConfigError("unknown cov_mode '" + std::string(name) + "' (expected full or diag)");
}

std::string_view cov_mode_name(CovMode mode) { return mode == CovMode::kFull ? "full" : "diag"; }

Vector2 DensityParams::beta() const { return {softplus(raw_beta[0]), softplus(raw_beta[1])}; }

Vector2 DensityParams::diag() const { return {softplus(raw_diag[0]), softplus(raw_diag[1])}; }

Matrix2 DensityParams::cholesky_precision() const {
  const Vector2 d = diag();
  Matrix2 u;
  u << d[0], (mode == CovMode::kFull ? offdiag : 0.0), 0.0, d[1];
  return u;
}

Matrix base_log_terms(const Matrix& u, const DensityParams& params) {
  const Matrix2 chol = params.cholesky_precision();
  const double log_d0 = std::log(chol(0, 0));
  const double log_d1 = std::log(chol(1, 1));
  Matrix out(2, u.cols());
  for (Eigen::Index p = 0; p < u.cols(); ++p) {
    const double v0 = u(0, p) - params.mean[0];
    const double v1 = u(1, p) - params.mean[1];
    const double q0 = chol(0, 0) * v0 + chol(0, 1) * v1;
    const double q1 = chol(1, 1) * v1;
    out(0, p) = log_d0 - 0.5 * q0 * q0 - kHalfLog2Pi;
    out(1, p) = log_d1 - 0.5 * q1 * q1 - kHalfLog2Pi;
  }
  return out;
}

Matrix class_logits(const FlowOutput& flow_out, const DensityParams& params, double shared_split) {
  Matrix s = base_log_terms(flow_out.u, params) + flow_out.ldj_channel;
  const Vector2 beta = params.beta();
  s.row(0).array() += std::log(beta[0]) + shared_split * flow_out.ldj_shared.array();
  s.row(1).array() += std::log(beta[1]) + (1.0 - shared_split) * flow_out.ldj_shared.array();
  if (!s.allFinite()) throw NumericError("non-finite class logits");
  return s;
}

RowVector posterior(const Matrix& logits) {
  RowVector out(logits.cols());
  for (Eigen::Index p = 0; p < logits.cols(); ++p) {
    // softmax_2 = 1 / (1 + exp(s1 - s2)) = sigmoid(s2 - s1)
    out[p] = sigmoid(logits(1, p) - logits(0, p));
  }
  return out;
}

RowVector total_log_density(const FlowOutput& flow_out, const DensityParams& params) {
  return base_log_terms(flow_out.u, params).colwise().sum() + flow_out.total_ldj();
}

}  // namespace fed
