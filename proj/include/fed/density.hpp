// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// Class-conditional head on top of the flow output. The base density is a
// bivariate Gaussian whose precision is U^T U with U upper triangular:
//
//   U = [ softplus(raw_diag_1)  offdiag              ]
//       [ 0                     softplus(raw_diag_2) ]
//
// and log N(u | mu, (U^T U)^-1) = sum_m l_m(u) with
//   l_m(u) = log U_mm - 1/2 [U (u - mu)]_m^2 - 1/2 log(2 pi).
// Class m (1 = positive, 2 = negative) pairs with latent dimension m:
//   s_m = log beta_m + l_m(u) + ldj_channel_m + share_m * ldj_shared.

#pragma once

#include <string_view>

#include "fed/flow.hpp"
#include "fed/linalg.hpp"

namespace fed {

enum class CovMode { kFull, kDiag };
CovMode parse_cov_mode(std::string_view name);
std::string_view cov_mode_name(CovMode mode);

struct DensityParams {
  Vector2 raw_beta = Vector2::Zero();
  Vector2 mean = Vector2::Zero();
  Vector2 raw_diag = Vector2::Zero();
  double offdiag = 0.0;  // U_12; held at zero in diag mode
  CovMode mode = CovMode::kFull;

  Vector2 beta() const;
  Vector2 diag() const;
  /// Upper-triangular Cholesky factor of the precision matrix.
  Matrix2 cholesky_precision() const;
};

/// Per-dimension Gaussian terms l_m(u), 2 x N.
Matrix base_log_terms(const Matrix& u, const DensityParams& params);

/// Class logits s (2 x N). `shared_split` is the fraction of ldj_shared given
/// to class 1; class 2 receives the rest.
Matrix class_logits(const FlowOutput& flow_out, const DensityParams& params,
                    double shared_split = 0.5);

/// Softmax probability of the negative class (row 2 of s).
RowVector posterior(const Matrix& logits);

/// log p(z) under the flow: sum_m l_m(u) + total log|det J| (beta excluded).
RowVector total_log_density(const FlowOutput& flow_out, const DensityParams& params);

}  // namespace fed
