// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "fed/error.hpp"

namespace fed {
namespace {

// Groups of tied scores in descending order with per-group class counts.
struct TieGroup {
  double score;
  std::uint64_t positives;  // truth == 1
  std::uint64_t negatives;  // truth == 0
};

std::vector<TieGroup> descending_groups(const ScoredPixels& sp) {
  if (sp.scores.size() != sp.truth.size()) {
    throw ShapeError("scores and truth differ in length");
  }
  std::vector<std::size_t> idx(sp.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return sp.scores[a] > sp.scores[b]; });
  std::vector<TieGroup> groups;
  for (std::size_t i : idx) {
    const double s = sp.scores[i];
    if (std::isnan(s)) throw NumericError("NaN score");
    if (groups.empty() || groups.back().score != s) groups.push_back({s, 0, 0});
    (sp.truth[i] ? groups.back().positives : groups.back().negatives) += 1;
  }
  return groups;
}

void count_classes(const std::vector<TieGroup>& groups, std::uint64_t& pos, std::uint64_t& neg) {
  pos = neg = 0;
  for (const auto& g : groups) {
    pos += g.positives;
    neg += g.negatives;
  }
}

}  // namespace

double auroc(const ScoredPixels& sp) {
  const auto groups = descending_groups(sp);
  std::uint64_t pos, neg;
  count_classes(groups, pos, neg);
  if (pos == 0 || neg == 0) throw ConfigError("AuROC needs both classes present");
  // Twice the Mann-Whitney U, kept integral.
  std::uint64_t twice_u = 0;
  std::uint64_t negatives_below = neg;
  for (const auto& g : groups) {
    negatives_below -= g.negatives;
    twice_u += 2 * g.positives * negatives_below + g.positives * g.negatives;
  }
  return static_cast<double>(twice_u) / 2.0 / (static_cast<double>(pos) * static_cast<double>(neg));
}

double average_precision(const ScoredPixels& sp) {
  const auto groups = descending_groups(sp);
  std::uint64_t pos, neg;
  count_classes(groups, pos, neg);
  if (pos == 0) throw ConfigError("average precision needs at least one detection-positive");
  // Recall steps are g.positives / pos, so sum positives * precision first.
  long double weighted = 0.0L;
  std::uint64_t tp = 0, fp = 0;
  for (const auto& g : groups) {
    tp += g.positives;
    fp += g.negatives;
    weighted += static_cast<long double>(g.positives) * static_cast<long double>(tp) /
                static_cast<long double>(tp + fp);
  }
  return static_cast<double>(weighted / static_cast<long double>(pos));
}

double fpr_at_95tpr(const ScoredPixels& sp) {
  const auto groups = descending_groups(sp);
  std::uint64_t pos, neg;
  count_classes(groups, pos, neg);
  if (pos == 0) throw ConfigError("FPR95 needs at least one detection-positive");
  if (neg == 0) throw ConfigError("FPR95 needs at least one detection-negative");
  std::uint64_t tp = 0, fp = 0;
  for (const auto& g : groups) {
    tp += g.positives;
    fp += g.negatives;
    if (100 * tp >= 95 * pos) break;
  }
  return static_cast<double>(fp) / static_cast<double>(neg);
}

F1Threshold f1_threshold(const ScoredPixels& sp) {
  if (sp.size() == 0) throw ConfigError("F1 threshold of an empty score set");
  const auto groups = descending_groups(sp);
  std::uint64_t pos, neg;
  count_classes(groups, pos, neg);
  if (pos == 0) {
    return {std::nextafter(groups.front().score, std::numeric_limits<double>::infinity()), 0.0};
  }
  // F1 = 2tp / (2tp + fp + fn) compared exactly by cross-multiplication.
  std::uint64_t best_num = 0, best_den = 1;
  F1Threshold best{groups.front().score, 0.0};
  std::uint64_t tp = 0, fp = 0;
  for (const auto& g : groups) {
    tp += g.positives;
    fp += g.negatives;
    const std::uint64_t num = 2 * tp;
    const std::uint64_t den = 2 * tp + fp + (pos - tp);
    if (static_cast<unsigned __int128>(num) * best_den >
        static_cast<unsigned __int128>(best_num) * den) {
      best_num = num;
      best_den = den;
      best = {g.score, static_cast<double>(num) / static_cast<double>(den)};
    }
  }
  return best;
}

ConfusionMatrix::ConfusionMatrix(std::size_t known_classes)
    : known_(known_classes), counts_((known_classes + 1) * (known_classes + 1), 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t pred, std::uint64_t count) {
  counts_.at(truth * (known_ + 1) + pred) += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.known_ != known_) throw ShapeError("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t pred) const {
  return counts_.at(truth * (known_ + 1) + pred);
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

double ConfusionMatrix::mean_known_iou() const {
  if (total() == 0) throw ConfigError("open-mIoU over an empty valid region");
  const std::size_t n = known_ + 1;
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < known_; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row += at(k, j);
      col += at(j, k);
    }
    const std::uint64_t tp = at(k, k);
    const std::uint64_t uni = row + col - tp;
    if (uni == 0) continue;
    sum += static_cast<double>(tp) / static_cast<double>(uni);
    ++present;
  }
  if (present == 0) throw ConfigError("open-mIoU: no known class present");
  return sum / static_cast<double>(present);
}

void accumulate_open_confusion(ConfusionMatrix& cm, const LabelMap& pred, const Tensor& scores,
                               const LabelMap& labels, double threshold, VoidRole role) {
  if (pred.shape != labels.shape || scores.shape != labels.shape) {
    throw ShapeError("prediction, score and label maps must share one shape");
  }
  const std::size_t c = cm.known_classes();
  for (std::size_t p = 0; p < labels.size(); ++p) {
    std::size_t truth;
    if (labels[p] == kVoidLabel) {
      if (role == VoidRole::kIgnore) continue;
      truth = c;
    } else {
      truth = static_cast<std::size_t>(labels[p]);
    }
    const std::size_t predicted = scores[p] >= threshold ? c : static_cast<std::size_t>(pred[p]);
    if (truth > c || predicted > c) throw ShapeError("label outside the class range");
    cm.add(truth, predicted);
  }
}

double open_miou(const LabelMap& pred, const Tensor& scores, const LabelMap& labels,
                 double threshold, std::size_t classes, VoidRole role) {
  ConfusionMatrix cm(classes);
  accumulate_open_confusion(cm, pred, scores, labels, threshold, role);
  return cm.mean_known_iou();
}

Tensor resize_bilinear(const Tensor& map, std::size_t height, std::size_t width) {
  if (map.rank() != 2) throw ShapeError("resize expects an H x W map");
  const std::size_t in_h = map.dim(0), in_w = map.dim(1);
  if (in_h == height && in_w == width) return map;
  Tensor out({height, width});
  auto coord = [](std::size_t dst, std::size_t in, std::size_t out_n, std::size_t& i0,
                  std::size_t& i1, double& frac) {
    double src = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) /
                     static_cast<double>(out_n) - 0.5;
    src = std::max(src, 0.0);
    i0 = std::min(static_cast<std::size_t>(src), in - 1);
    i1 = std::min(i0 + 1, in - 1);
    frac = src - static_cast<double>(i0);
    if (i0 == in - 1) frac = 0.0;
  };
  for (std::size_t y = 0; y < height; ++y) {
    std::size_t y0, y1;
    double fy;
    coord(y, in_h, height, y0, y1, fy);
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t x0, x1;
      double fx;
      coord(x, in_w, width, x0, x1, fx);
      const double top = map[y0 * in_w + x0] * (1 - fx) + map[y0 * in_w + x1] * fx;
      const double bottom = map[y1 * in_w + x0] * (1 - fx) + map[y1 * in_w + x1] * fx;
      out[y * width + x] = top * (1 - fy) + bottom * fy;
    }
  }
  return out;
}

Tensor tta_average(const std::vector<Tensor>& maps, std::size_t height, std::size_t width) {
  if (maps.empty()) throw ConfigError("TTA needs at least one score map");
  Tensor acc({height, width});
  for (const auto& m : maps) {
    const Tensor r = resize_bilinear(m, height, width);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += r[i];
  }
  for (double& v : acc.data) v /= static_cast<double>(maps.size());
  return acc;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"auroc", r.auroc},
          {"ap", r.ap},
          {"fpr95", r.fpr95},
          {"f1_threshold", r.f1_threshold},
          {"f1", r.f1},
          {"open_miou", r.open_miou},
          {"open_miou_no_detector", r.open_miou_no_detector},
          {"counts", {{"n_pos", r.n_pos}, {"n_neg", r.n_neg}, {"n_ignored", r.n_ignored}}},
          {"void_role", r.void_role}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.auroc = j.at("auroc").get<double>();
  r.ap = j.at("ap").get<double>();
  r.fpr95 = j.at("fpr95").get<double>();
  r.f1_threshold = j.at("f1_threshold").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.open_miou = j.at("open_miou").get<double>();
  r.open_miou_no_detector = j.at("open_miou_no_detector").get<double>();
  r.n_pos = j.at("counts").at("n_pos").get<std::uint64_t>();
  r.n_neg = j.at("counts").at("n_neg").get<std::uint64_t>();
  r.n_ignored = j.at("counts").at("n_ignored").get<std::uint64_t>();
  r.void_role = j.at("void_role").get<std::string>();
  return r;
}

std::string report_table_line(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "AuROC %.2f | AP %.2f | FPR95 %.2f | open-mIoU %.2f (no detector %.2f) | "
                "pos %llu neg %llu ignored %llu",
                100 * r.auroc, 100 * r.ap, 100 * r.fpr95, 100 * r.open_miou,
                100 * r.open_miou_no_detector, static_cast<unsigned long long>(r.n_pos),
                static_cast<unsigned long long>(r.n_neg), static_cast<unsigned long long>(r.n_ignored));
  return buf;
}

}  // namespace fed
