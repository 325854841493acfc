// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fed/error.hpp"
#include "fed/metrics.hpp"
#include "oracles.hpp"

namespace fed {
namespace {

ScoredPixels make(std::vector<double> scores, std::vector<std::uint8_t> truth) {
  return ScoredPixels{std::move(scores), std::move(truth)};
}

ScoredPixels random_case(std::mt19937_64& rng, std::size_t n, int levels) {
  std::uniform_int_distribution<int> level(0, levels - 1);
  std::bernoulli_distribution coin(0.3);
  ScoredPixels sp;
  for (std::size_t i = 0; i < n; ++i) sp.append(level(rng) / static_cast<double>(levels), coin(rng));
  sp.truth[0] = 1;
  sp.truth[1] = 0;
  return sp;
}

TEST(Auroc, Examples) {
  EXPECT_DOUBLE_EQ(auroc(make({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1})), 0.75);
  EXPECT_DOUBLE_EQ(auroc(make({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1})), 1.0);
  EXPECT_DOUBLE_EQ(auroc(make({0.5, 0.5, 0.5}, {0, 1, 1})), 0.5);
  EXPECT_THROW(auroc(make({0.1, 0.2}, {1, 1})), Error);
}

TEST(Auroc, MonotoneInvarianceAndFlip) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  ScoredPixels sp;
  for (int i = 0; i < 300; ++i) sp.append(normal(rng), i % 3 == 0);
  ScoredPixels warped = sp;
  for (double& s : warped.scores) s = std::exp(3.0 * s) + 1.0;
  EXPECT_DOUBLE_EQ(auroc(warped), auroc(sp));
  // Either flip alone complements the AuROC; both together cancel out.
  ScoredPixels negated = sp, relabelled = sp, both = sp;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    negated.scores[i] = both.scores[i] = -sp.scores[i];
    relabelled.truth[i] = both.truth[i] = 1 - sp.truth[i];
  }
  EXPECT_NEAR(auroc(sp) + auroc(negated), 1.0, 1e-14);
  EXPECT_NEAR(auroc(sp) + auroc(relabelled), 1.0, 1e-14);
  EXPECT_NEAR(auroc(both), auroc(sp), 1e-14);
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(average_precision(make({0.3, 0.2}, {1, 1})), 1.0);
  EXPECT_NEAR(average_precision(make({0.9, 0.8, 0.7}, {1, 0, 1})), 5.0 / 6.0, 1e-15);
  EXPECT_THROW(average_precision(make({0.3, 0.2}, {0, 0})), Error);
}

TEST(Fpr95, Examples) {
  EXPECT_DOUBLE_EQ(fpr_at_95tpr(make({0.9, 0.3, 0.5, 0.1}, {1, 1, 0, 0})), 0.5);
  EXPECT_DOUBLE_EQ(fpr_at_95tpr(make({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})), 0.0);
  // 10 positives: 95% forces all ten.
  ScoredPixels sp;
  for (int i = 0; i < 10; ++i) sp.append(1.0 + i, true);
  sp.append(0.5, false);
  sp.append(1.5, false);
  EXPECT_DOUBLE_EQ(fpr_at_95tpr(sp), 0.5);
  EXPECT_THROW(fpr_at_95tpr(make({0.1}, {0})), Error);
}

TEST(F1Threshold, Examples) {
  const F1Threshold a = f1_threshold(make({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}));
  EXPECT_EQ(a.threshold, 0.8);
  EXPECT_EQ(a.f1, 1.0);
  const F1Threshold none = f1_threshold(make({0.9, 0.3}, {0, 0}));
  EXPECT_GT(none.threshold, 0.9);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(RankingMetrics, MatchBruteForceOracles) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + trial * 5;
    const ScoredPixels sp = random_case(rng, n, trial % 2 ? 7 : 100000);
    EXPECT_NEAR(auroc(sp), oracle::auroc_pairs(sp.scores, sp.truth), 1e-12);
    EXPECT_NEAR(average_precision(sp), oracle::ap_sweep(sp.scores, sp.truth), 1e-12);
    EXPECT_NEAR(fpr_at_95tpr(sp), oracle::fpr95_sweep(sp.scores, sp.truth), 1e-12);
    const F1Threshold f = f1_threshold(sp);
    const oracle::F1Point o = oracle::f1_sweep(sp.scores, sp.truth);
    EXPECT_EQ(f.threshold, o.threshold);
    EXPECT_NEAR(f.f1, o.f1, 1e-12);
  }
}

TEST(OpenMiou, HandBuiltExample) {
  const LabelMap truth({2, 2}, std::vector<std::int32_t>{0, 0, 1, 255});
  const LabelMap pred({2, 2}, std::vector<std::int32_t>{0, 1, 1, 1});
  const Tensor scores({2, 2}, std::vector<double>{0.1, 0.2, 0.3, 0.9});
  EXPECT_DOUBLE_EQ(open_miou(pred, scores, truth, 0.5, 2), 0.5);

  ConfusionMatrix cm(2);
  accumulate_open_confusion(cm, pred, scores, truth, 0.5, VoidRole::kOodClass);
  EXPECT_EQ(cm.at(0, 0), 1u);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(1, 1), 1u);
  EXPECT_EQ(cm.at(2, 2), 1u);
  EXPECT_EQ(cm.total(), 4u);
}

TEST(OpenMiou, PerfectAndNoDetector) {
  const LabelMap truth({1, 4}, std::vector<std::int32_t>{0, 1, 255, 1});
  const LabelMap pred({1, 4}, std::vector<std::int32_t>{0, 1, 0, 1});
  const Tensor scores({1, 4}, std::vector<double>{0.0, 0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(open_miou(pred, scores, truth, 0.5, 2), 1.0);
  // Nothing flagged: void truth is a false negative of class 0's prediction.
  EXPECT_DOUBLE_EQ(open_miou(pred, scores, truth, 2.0, 2), (0.5 + 1.0) / 2.0);
  // Ignore role drops the void pixel entirely.
  EXPECT_DOUBLE_EQ(open_miou(pred, scores, truth, 2.0, 2, VoidRole::kIgnore), 1.0);
}

TEST(OpenMiou, PermutationAndShiftInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabelMap truth({1, 50}), pred({1, 50});
  Tensor scores({1, 50});
  for (std::size_t i = 0; i < 50; ++i) {
    const int t = cls(rng);
    truth[i] = t == 3 ? 255 : t;
    pred[i] = cls(rng) % 3;
    scores[i] = normal(rng);
  }
  const double base = open_miou(pred, scores, truth, 0.3, 3);
  LabelMap truth_p = truth, pred_p = pred;
  Tensor scores_p = scores;
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < 50; ++i) {
    truth_p[i] = truth[perm[i]];
    pred_p[i] = pred[perm[i]];
    scores_p[i] = scores[perm[i]] + 4.0;
  }
  EXPECT_DOUBLE_EQ(open_miou(pred_p, scores_p, truth_p, 4.3, 3), base);
}

TEST(OpenMiou, MergeIsAssociative) {
  const LabelMap t1({1, 3}, std::vector<std::int32_t>{0, 1, 255}), p1({1, 3}, std::vector<std::int32_t>{0, 0, 1});
  const Tensor s1({1, 3}, std::vector<double>{0, 1, 1});
  ConfusionMatrix a(2), b(2), all(2);
  accumulate_open_confusion(a, p1, s1, t1, 0.5, VoidRole::kOodClass);
  accumulate_open_confusion(b, p1, s1, t1, 0.9, VoidRole::kOodClass);
  accumulate_open_confusion(all, p1, s1, t1, 0.5, VoidRole::kOodClass);
  accumulate_open_confusion(all, p1, s1, t1, 0.9, VoidRole::kOodClass);
  a.merge(b);
  EXPECT_EQ(a.mean_known_iou(), all.mean_known_iou());
  EXPECT_EQ(a.total(), 6u);
  EXPECT_THROW(ConfusionMatrix(2).mean_known_iou(), Error);
}

TEST(Resize, ConventionAndTta) {
  const Tensor m({1, 2}, std::vector<double>{0.0, 1.0});
  const Tensor up = resize_bilinear(m, 1, 4);
  // Half-pixel centres: sources at -0.25, 0.25, 0.75, 1.25, clamped.
  EXPECT_EQ(up.data, (std::vector<double>{0.0, 0.25, 0.75, 1.0}));
  EXPECT_EQ(resize_bilinear(up, 1, 4), up);

  const Tensor a({2, 2}, 0.2), b({4, 4}, 0.4);
  const Tensor avg = tta_average({a, b}, 3, 3);
  for (double v : avg.data) EXPECT_NEAR(v, 0.3, 1e-15);
  EXPECT_EQ(tta_average({up, up}, 1, 4), up);
  EXPECT_THROW(tta_average({}, 2, 2), Error);
}

TEST(Report, JsonRoundTrip) {
  MetricsReport r;
  r.auroc = 0.9123456789012345;
  r.ap = 0.5;
  r.fpr95 = 0.125;
  r.f1_threshold = 0.3;
  r.f1 = 0.7;
  r.open_miou = 0.6;
  r.open_miou_no_detector = 0.55;
  r.n_pos = 10;
  r.n_neg = 3;
  r.n_ignored = 2;
  r.void_role = "ignore";
  const MetricsReport back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.auroc, r.auroc);
  EXPECT_EQ(back.n_ignored, 2u);
  EXPECT_EQ(back.void_role, "ignore");
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_FALSE(report_table_line(r).empty());
}

}  // namespace
}  // namespace fed
