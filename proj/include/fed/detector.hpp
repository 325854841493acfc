// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// The complete detector (flow + distributional head), its named parameter
// registry, conversion to/from model archives, and per-sample scoring.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fed/density.hpp"
#include "fed/featurize.hpp"
#include "fed/flow.hpp"
#include "fed/tensor_store.hpp"

namespace fed {

struct Detector {
  FlowParams flow;
  DensityParams density;
  std::size_t classes = 0;
  std::size_t embedding_dims = 0;
  std::uint64_t seed = 0;
  double energy_clamp_eps = kDefaultEnergyClampEps;

  const FlowConfig& config() const { return flow.config; }
  /// Same structure, every parameter zero.
  Detector zeros_like() const;
};

Detector init_detector(const FlowConfig& config, CovMode cov_mode, std::uint64_t seed);

struct ParamRef {
  std::string name;
  Shape shape;
  std::span<double> values;
  bool weight_decay = false;  // subnet weights and mixing matrices only
};

/// Stable, archive-order list of every trainable tensor.
std::vector<ParamRef> parameter_refs(Detector& detector);

ModelArchive to_archive(const Detector& detector);
/// Throws FormatError/ShapeError when the archive does not describe a valid
/// detector.
Detector from_archive(const ModelArchive& archive);

/// Flow-ready view of one image (or a crop of one).
struct FeatureMaps {
  PixelGrid grid;
  Matrix z;     // 2 x N
  Matrix cond;  // P x N
  std::vector<std::int32_t> labels;  // kPositive / kNegative per pixel, may be empty
};

/// Featurizes a sample for a detector with `cond_channels` = P. Throws
/// ConfigError when P > 0 and the sample carries no embeddings.
FeatureMaps featurize_sample(const DatasetSample& sample, std::size_t cond_channels,
                             double energy_clamp_eps, bool with_labels);

/// Concatenates equally sized feature maps into one batch.
FeatureMaps concat_features(const std::vector<const FeatureMaps*>& parts);

/// Negative-class posterior for every pixel, H x W.
Tensor score_sample(const Detector& detector, const DatasetSample& sample);

}  // namespace fed
