// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// Dataset-level steps shared by the command-line tool and the acceptance
// suite: featurize a dataset, score it, evaluate score maps.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fed/config.hpp"
#include "fed/detector.hpp"
#include "fed/metrics.hpp"
#include "fed/train.hpp"

namespace fed {

std::vector<DatasetSample> load_dataset(const std::filesystem::path& root,
                                        LabelPolicy labels = LabelPolicy::kRequired);

/// Throws ShapeError when the detector cannot consume the dataset.
void check_compatible(const Detector& detector, const DatasetManifest& manifest);

FitResult train_detector(const std::vector<DatasetSample>& samples, const TrainFile& config,
                         const ProgressFn& progress = {});

/// Detector posterior, or a baseline score when `baseline` is set.
Tensor score_map(const Detector* detector, std::optional<BaselineKind> baseline,
                 const DatasetSample& sample);

/// Existing sibling resolution variants of a dataset root: root_s25,
/// root_s50 and root_s100, in that order.
std::vector<std::filesystem::path> tta_variants(const std::filesystem::path& root);

struct ScoreOptions {
  std::optional<BaselineKind> baseline;
  bool tta = false;
  bool png = false;
};

/// Scores every sample of `data` and writes out/<id>/score.npy (and
/// score.png). With tta the maps of every variant are resized to the base
/// resolution and averaged.
void score_dataset(const std::filesystem::path& data, const Detector* detector,
                   const ScoreOptions& options, const std::filesystem::path& out);

/// Pools the valid pixels of all samples, picks the F1-optimal threshold and
/// computes every metric. `scores[i]` belongs to `samples[i]`.
MetricsReport evaluate_maps(const std::vector<DatasetSample>& samples,
                            const std::vector<Tensor>& scores, VoidRole role);

/// Reads scores/<id>/score.npy for every sample of `data`.
MetricsReport evaluate_dataset(const std::filesystem::path& data,
                               const std::filesystem::path& scores, VoidRole role);

}  // namespace fed
