// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <random>

#include "fed/error.hpp"
#include "fed/featurize.hpp"
#include "fed/npy.hpp"
#include "fed/parallel.hpp"

namespace fed {
namespace fs = std::filesystem;

namespace {

using Field = std::vector<double>;

// Three passes of an edge-clamped box blur: a cheap low-pass field.
Field smooth_noise(std::size_t h, std::size_t w, std::size_t radius, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Field f(h * w);
  for (double& v : f) v = normal(rng);
  Field tmp(h * w);
  const long r = static_cast<long>(radius);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  for (int pass = 0; pass < 3; ++pass) {
    for (long y = 0; y < lh; ++y)
      for (long x = 0; x < lw; ++x) {
        double s = 0.0;
        for (long d = -r; d <= r; ++d) s += f[y * lw + std::clamp(x + d, 0L, lw - 1)];
        tmp[y * lw + x] = s / static_cast<double>(2 * r + 1);
      }
    for (long y = 0; y < lh; ++y)
      for (long x = 0; x < lw; ++x) {
        double s = 0.0;
        for (long d = -r; d <= r; ++d) s += tmp[std::clamp(y + d, 0L, lh - 1) * lw + x];
        f[y * lw + x] = s / static_cast<double>(2 * r + 1);
      }
  }
  return f;
}

// Marks the `count` highest-field pixels among those with eligible[p] set.
std::vector<std::uint8_t> top_pixels(const Field& field, const std::vector<std::uint8_t>& eligible,
                                     std::size_t count) {
  std::vector<std::size_t> idx;
  for (std::size_t p = 0; p < field.size(); ++p)
    if (eligible[p]) idx.push_back(p);
  count = std::min(count, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(count), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return field[a] > field[b] || (field[a] == field[b] && a < b);
                    });
  std::vector<std::uint8_t> mask(field.size(), 0);
  for (std::size_t i = 0; i < count; ++i) mask[idx[i]] = 1;
  return mask;
}

// Class and OOD embedding centres shared by every sample of a dataset.
std::vector<std::vector<double>> embedding_means(const SynthConfig& c) {
  std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                    0x6d65616eu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> means(c.classes + 1, std::vector<double>(c.embedding_dims));
  for (auto& m : means)
    for (double& v : m) v = normal(rng);
  return means;
}

}  // namespace

void SynthConfig::validate() const {
  if (classes < 2) throw ConfigError("synth: C must be >= 2");
  if (height == 0 || width == 0) throw ConfigError("synth: H and W must be positive");
  if (samples == 0) throw ConfigError("synth: n_samples must be positive");
  if (rho_idm < 0.0 || rho_ood < 0.0 || rho_idm + rho_ood >= 1.0) {
    throw ConfigError("synth: need rho_idm, rho_ood >= 0 and rho_idm + rho_ood < 1");
  }
  if (!(margin_id > 0.0)) throw ConfigError("synth: margin_id must be positive");
  if (!(energy_gap > 0.0)) throw ConfigError("synth: energy_gap must be positive");
  if (noise_std < 0.0) throw ConfigError("synth: noise_std must be non-negative");
}

DatasetSample synth_sample(const SynthConfig& c, std::size_t index, SynthTruth* truth) {
  c.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t h = c.height, w = c.width, plane = h * w;
  const std::size_t radius = std::max<std::size_t>(1, std::min(h, w) / 10);

  // Spatially coherent class regions.
  std::vector<Field> class_fields;
  for (std::size_t k = 0; k < c.classes; ++k) class_fields.push_back(smooth_noise(h, w, radius, rng));
  LabelMap labels({h, w});
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c.classes; ++k)
      if (class_fields[k][p] > class_fields[best][p]) best = k;
    labels[p] = static_cast<std::int32_t>(best);
  }

  // Planted negatives: OOD blobs first, IDM blobs among the rest.
  const std::vector<std::uint8_t> all(plane, 1);
  const auto n_ood = static_cast<std::size_t>(std::llround(c.rho_ood * static_cast<double>(plane)));
  const auto n_idm = static_cast<std::size_t>(std::llround(c.rho_idm * static_cast<double>(plane)));
  const auto ood = top_pixels(smooth_noise(h, w, radius, rng), all, n_ood);
  std::vector<std::uint8_t> not_ood(plane);
  for (std::size_t p = 0; p < plane; ++p) not_ood[p] = !ood[p];
  const auto idm = top_pixels(smooth_noise(h, w, radius, rng), not_ood, n_idm);

  const double cls = static_cast<double>(c.classes);
  const double id_lse = c.margin_id + std::log1p((cls - 1.0) * std::exp(-c.margin_id));
  const double offset = id_lse - kSynthIdNegEnergy;
  const double ood_level = id_lse - c.energy_gap - std::log(cls);

  const auto means = embedding_means(c);
  std::uniform_int_distribution<std::size_t> other(1, c.classes - 1);

  DatasetSample s;
  char name[32];
  std::snprintf(name, sizeof name, "sample_%04zu", index);
  s.sample_id = name;
  s.logits = Tensor({c.classes, h, w});
  if (c.embedding_dims > 0) s.embeddings = Tensor({c.embedding_dims, h, w});

  SynthTruth t;
  t.pixels = plane;
  std::vector<double> column(c.classes);
  for (std::size_t p = 0; p < plane; ++p) {
    const auto y = static_cast<std::size_t>(labels[p]);
    std::size_t emb_a = y, emb_b = y;
    if (ood[p]) {
      for (auto& v : column) v = ood_level + 0.25 * c.noise_std * normal(rng);
      labels[p] = kVoidLabel;
      emb_a = emb_b = c.classes;
      ++t.planted_ood;
    } else if (idm[p]) {
      const std::size_t wrong = (y + other(rng)) % c.classes;
      for (auto& v : column) v = c.noise_std * normal(rng);
      column[wrong] += 0.5 * c.margin_id;
      column[y] += 0.25 * c.margin_id;
      emb_b = wrong;
      ++t.planted_idm;
    } else {
      for (auto& v : column) v = c.noise_std * normal(rng);
      column[y] += c.margin_id;
    }
    for (std::size_t k = 0; k < c.classes; ++k) s.logits[k * plane + p] = column[k] - offset;

    if (!ood[p]) {
      const auto top = static_cast<std::size_t>(
          std::max_element(column.begin(), column.end()) - column.begin());
      if (idm[p] && top == y) ++t.idm_reverted;
      if (!idm[p] && top != y) ++t.noise_flips;
    }
    for (std::size_t v = 0; v < c.embedding_dims; ++v) {
      const double centre = 0.5 * (means[emb_a][v] + means[emb_b][v]);
      (*s.embeddings)[v * plane + p] = centre + 0.5 * normal(rng);
    }
  }
  // Stored as float32 on disk; keep the in-memory copy identical.
  for (double& v : s.logits.data) v = static_cast<float>(v);
  if (s.embeddings)
    for (double& v : s.embeddings->data) v = static_cast<float>(v);
  s.labels = std::move(labels);
  if (truth) *truth = t;
  return s;
}

nlohmann::json synth_generate(const SynthConfig& c, const fs::path& out_dir) {
  c.validate();
  fs::create_directories(out_dir);
  DatasetManifest manifest;
  manifest.classes = c.classes;
  manifest.embedding_dims = c.embedding_dims;
  for (std::size_t k = 0; k < c.classes; ++k) manifest.class_names.push_back("class_" + std::to_string(k));

  std::vector<SynthTruth> truths(c.samples);
  std::vector<double> id_energy_sum(c.samples, 0.0), ood_energy_sum(c.samples, 0.0);
  std::vector<std::uint64_t> void_count(c.samples, 0), negatives(c.samples, 0);
  std::vector<std::string> ids(c.samples);
  parallel_for(c.samples, [&](std::size_t i) {
    const DatasetSample s = synth_sample(c, i, &truths[i]);
    write_sample(out_dir / s.sample_id, s);
    ids[i] = s.sample_id;
    const Tensor neg_energy = free_energy(s.logits);
    const PixelLabelMap m = binary_labels(s.logits, *s.labels);
    for (std::size_t p = 0; p < neg_energy.size(); ++p) {
      const bool is_void = (*s.labels)[p] == kVoidLabel;
      (is_void ? ood_energy_sum[i] : id_energy_sum[i]) += -neg_energy[p];
      void_count[i] += is_void;
      negatives[i] += m.m[p] == kNegative;
    }
  });
  manifest.sample_ids = ids;
  write_dataset_manifest(out_dir, manifest);

  SynthTruth total;
  std::uint64_t voids = 0, neg = 0;
  double id_sum = 0.0, ood_sum = 0.0;
  for (std::size_t i = 0; i < c.samples; ++i) {
    total.pixels += truths[i].pixels;
    total.planted_ood += truths[i].planted_ood;
    total.planted_idm += truths[i].planted_idm;
    total.noise_flips += truths[i].noise_flips;
    total.idm_reverted += truths[i].idm_reverted;
    voids += void_count[i];
    neg += negatives[i];
    id_sum += id_energy_sum[i];
    ood_sum += ood_energy_sum[i];
  }
  const double px = static_cast<double>(total.pixels);
  const std::uint64_t id_pixels = total.pixels - voids;
  nlohmann::json report = {
      {"config",
       {{"C", c.classes}, {"V", c.embedding_dims}, {"H", c.height}, {"W", c.width},
        {"n_samples", c.samples}, {"rho_idm", c.rho_idm}, {"rho_ood", c.rho_ood},
        {"margin_id", c.margin_id}, {"energy_gap", c.energy_gap}, {"noise_std", c.noise_std},
        {"seed", c.seed}}},
      {"pixels", total.pixels},
      {"planted_ood", total.planted_ood},
      {"planted_idm", total.planted_idm},
      {"planted_ood_fraction", static_cast<double>(total.planted_ood) / px},
      {"planted_idm_fraction", static_cast<double>(total.planted_idm) / px},
      {"measured_void_fraction", static_cast<double>(voids) / px},
      {"measured_negative_fraction", static_cast<double>(neg) / px},
      {"noise_flips", total.noise_flips},
      {"idm_reverted", total.idm_reverted},
      {"mean_energy_id", id_pixels ? id_sum / static_cast<double>(id_pixels) : 0.0},
      {"mean_energy_ood", voids ? ood_sum / static_cast<double>(voids) : 0.0},
  };
  write_file_atomic(out_dir / "truth_report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace fed
