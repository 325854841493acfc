// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// Detection metrics (AuROC, AP, FPR at 95% TPR, F1-optimal threshold),
// open-set mIoU, and score-level test-time augmentation.
//
// In every ranking metric the detection-positive class is truth == 1
// (negatives: misclassified or OOD pixels) and higher scores mean "more
// likely negative".

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fed/array.hpp"
#include "fed/featurize.hpp"

namespace fed {

struct ScoredPixels {
  std::vector<double> scores;
  std::vector<std::uint8_t> truth;  // 1 = negative / OOD

  std::size_t size() const { return scores.size(); }
  void append(double score, bool negative) {
    scores.push_back(score);
    truth.push_back(negative ? 1 : 0);
  }
};

/// Mann-Whitney estimate of P(score | truth=1 > score | truth=0), ties 1/2.
double auroc(const ScoredPixels& sp);

/// Step-interpolated AP over descending unique thresholds.
double average_precision(const ScoredPixels& sp);

/// FPR at the largest threshold whose TPR reaches 95%.
double fpr_at_95tpr(const ScoredPixels& sp);

struct F1Threshold {
  double threshold = 0.0;
  double f1 = 0.0;
};

/// Maximizes F1 of the truth=1 class over thresholds t in the distinct
/// scores (detect when score >= t); ties go to the larger t. Without any
/// truth=1 pixels the threshold lies just above the maximum score.
F1Threshold f1_threshold(const ScoredPixels& sp);

/// (C+1) x (C+1) confusion counts, rows = truth, cols = prediction; index C
/// is the open-set void class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t known_classes);

  void add(std::size_t truth, std::size_t pred, std::uint64_t count = 1);
  void merge(const ConfusionMatrix& other);
  std::uint64_t at(std::size_t truth, std::size_t pred) const;
  std::size_t known_classes() const { return known_; }
  std::uint64_t total() const;

  /// Mean IoU over the known classes that occur in truth or prediction.
  double mean_known_iou() const;

 private:
  std::size_t known_;
  std::vector<std::uint64_t> counts_;
};

/// Adds one image: pixels with score >= threshold become class C in the
/// prediction; ground-truth void (255) is class C (kOodClass) or skipped
/// (kIgnore).
void accumulate_open_confusion(ConfusionMatrix& cm, const LabelMap& pred, const Tensor& scores,
                               const LabelMap& labels, double threshold, VoidRole role);

double open_miou(const LabelMap& pred, const Tensor& scores, const LabelMap& labels,
                 double threshold, std::size_t classes, VoidRole role = VoidRole::kOodClass);

/// Bilinear resize of an H x W map, half-pixel centres, edge clamped.
Tensor resize_bilinear(const Tensor& map, std::size_t height, std::size_t width);

/// Resizes every map to (height, width) and averages them.
Tensor tta_average(const std::vector<Tensor>& maps, std::size_t height, std::size_t width);

struct MetricsReport {
  double auroc = 0.0;
  double ap = 0.0;
  double fpr95 = 0.0;
  double f1_threshold = 0.0;
  double f1 = 0.0;
  double open_miou = 0.0;
  double open_miou_no_detector = 0.0;
  std::uint64_t n_pos = 0;
  std::uint64_t n_neg = 0;
  std::uint64_t n_ignored = 0;
  std::string void_role;
};

nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
std::string report_table_line(const MetricsReport& report);

}  // namespace fed
