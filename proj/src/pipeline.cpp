// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/pipeline.hpp"

#include <limits>

#include "fed/error.hpp"
#include "fed/npy.hpp"
#include "fed/parallel.hpp"
#include "fed/png.hpp"

namespace fed {
namespace fs = std::filesystem;

std::vector<DatasetSample> load_dataset(const fs::path& root, LabelPolicy labels) {
  const DatasetManifest manifest = read_dataset_manifest(root);
  std::vector<DatasetSample> samples(manifest.sample_ids.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    samples[i] = read_dataset_sample(root, manifest, manifest.sample_ids[i], labels);
  });
  return samples;
}

void check_compatible(const Detector& detector, const DatasetManifest& manifest) {
  if (detector.classes != manifest.classes) {
    throw ShapeError("model expects C=" + std::to_string(detector.classes) + " but dataset has C=" +
                     std::to_string(manifest.classes));
  }
  const std::size_t p = detector.config().cond_channels;
  if (p == 0) return;
  if (manifest.embedding_dims == 0) {
    throw ShapeError("model is conditioned on P=" + std::to_string(p) +
                     " embedding channels but the dataset has no embeddings");
  }
  if (manifest.embedding_dims != detector.embedding_dims) {
    throw ShapeError("model expects V=" + std::to_string(detector.embedding_dims) +
                     " but dataset has V=" + std::to_string(manifest.embedding_dims));
  }
}

FitResult train_detector(const std::vector<DatasetSample>& samples, const TrainFile& config,
                         const ProgressFn& progress) {
  if (samples.empty()) throw ConfigError("training dataset is empty");
  const std::size_t p = config.detector.flow.cond_channels;
  std::vector<FeatureMaps> features(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    features[i] = featurize_sample(samples[i], p, config.detector.energy_clamp_eps, true);
  });
  Detector initial = init_detector(config.detector.flow, config.detector.cov_mode, config.train.seed);
  initial.classes = samples.front().classes();
  initial.embedding_dims = samples.front().embedding_dims();
  initial.energy_clamp_eps = config.detector.energy_clamp_eps;
  return fit(features, std::move(initial), config.train, progress);
}

Tensor score_map(const Detector* detector, std::optional<BaselineKind> baseline,
                 const DatasetSample& sample) {
  if (baseline) return baseline_scores(sample.logits, *baseline);
  if (!detector) throw ConfigError("scoring needs a model or a baseline");
  return score_sample(*detector, sample);
}

std::vector<fs::path> tta_variants(const fs::path& root) {
  fs::path base = root;
  if (!base.has_filename()) base = base.parent_path();
  std::vector<fs::path> found;
  for (const char* suffix : {"_s25", "_s50", "_s100"}) {
    fs::path candidate = base;
    candidate += suffix;
    if (fs::is_directory(candidate)) found.push_back(candidate);
  }
  return found;
}

void score_dataset(const fs::path& data, const Detector* detector, const ScoreOptions& options,
                   const fs::path& out) {
  const DatasetManifest manifest = read_dataset_manifest(data);
  if (!options.baseline) {
    if (!detector) throw ConfigError("scoring needs --model or --baseline");
    check_compatible(*detector, manifest);
  }
  std::vector<fs::path> roots{data};
  std::vector<DatasetManifest> manifests{manifest};
  if (options.tta) {
    roots = tta_variants(data);
    if (roots.empty()) {
      throw IoError("--tta: no resolution variants (_s25, _s50, _s100) next to " + data.string());
    }
    manifests.clear();
    for (const fs::path& r : roots) {
      manifests.push_back(read_dataset_manifest(r));
      if (!options.baseline) check_compatible(*detector, manifests.back());
    }
  }
  fs::create_directories(out);
  parallel_for(manifest.sample_ids.size(), [&](std::size_t i) {
    const std::string& id = manifest.sample_ids[i];
    Tensor score;
    if (options.tta) {
      const DatasetSample base = read_dataset_sample(data, manifest, id, LabelPolicy::kOptional);
      std::vector<Tensor> maps;
      for (std::size_t r = 0; r < roots.size(); ++r) {
        const DatasetSample s = read_dataset_sample(roots[r], manifests[r], id, LabelPolicy::kOptional);
        maps.push_back(score_map(detector, options.baseline, s));
      }
      score = tta_average(maps, base.height(), base.width());
    } else {
      const DatasetSample s = read_dataset_sample(data, manifest, id, LabelPolicy::kOptional);
      score = score_map(detector, options.baseline, s);
    }
    const fs::path dir = out / id;
    fs::create_directories(dir);
    save_real_npy(dir / "score.npy", score);
    if (options.png) write_score_png(dir / "score.png", score);
  });
}

MetricsReport evaluate_maps(const std::vector<DatasetSample>& samples,
                            const std::vector<Tensor>& scores, VoidRole role) {
  if (samples.size() != scores.size()) throw ShapeError("one score map per sample required");
  if (samples.empty()) throw ConfigError("nothing to evaluate");
  MetricsReport report;
  report.void_role = role == VoidRole::kOodClass ? "ood_class" : "ignore";
  ScoredPixels sp;
  std::vector<LabelMap> preds(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const DatasetSample& s = samples[i];
    if (!s.labels) throw FormatError("sample '" + s.sample_id + "' has no labels");
    if (scores[i].shape != Shape{s.height(), s.width()}) {
      throw ShapeError("score map of '" + s.sample_id + "' is " + shape_string(scores[i].shape) +
                       ", expected " + shape_string({s.height(), s.width()}));
    }
    const PixelLabelMap m = binary_labels(s.logits, *s.labels, role);
    for (std::size_t p = 0; p < m.m.size(); ++p) {
      if (!m.valid[p]) {
        ++report.n_ignored;
        continue;
      }
      const bool neg = m.m[p] == kNegative;
      sp.append(scores[i][p], neg);
      ++(neg ? report.n_neg : report.n_pos);
    }
    preds[i] = argmax_labels(s.logits);
  }
  report.auroc = auroc(sp);
  report.ap = average_precision(sp);
  report.fpr95 = fpr_at_95tpr(sp);
  const F1Threshold f1 = f1_threshold(sp);
  report.f1_threshold = f1.threshold;
  report.f1 = f1.f1;

  const std::size_t classes = samples.front().classes();
  ConfusionMatrix with(classes), without(classes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    accumulate_open_confusion(with, preds[i], scores[i], *samples[i].labels, f1.threshold, role);
    accumulate_open_confusion(without, preds[i], scores[i], *samples[i].labels,
                              std::numeric_limits<double>::infinity(), role);
  }
  report.open_miou = with.mean_known_iou();
  report.open_miou_no_detector = without.mean_known_iou();
  return report;
}

MetricsReport evaluate_dataset(const fs::path& data, const fs::path& scores, VoidRole role) {
  const DatasetManifest manifest = read_dataset_manifest(data);
  std::vector<DatasetSample> samples(manifest.sample_ids.size());
  std::vector<Tensor> maps(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const std::string& id = manifest.sample_ids[i];
    samples[i] = read_dataset_sample(data, manifest, id, LabelPolicy::kRequired);
    const fs::path file = scores / id / "score.npy";
    if (!fs::exists(file)) throw IoError("missing scores for sample '" + id + "' (" + file.string() + ")");
    maps[i] = load_real_npy(file);
  });
  return evaluate_maps(samples, maps, role);
}

}  // namespace fed
