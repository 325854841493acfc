// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>

#include "fed/error.hpp"
#include "fed/featurize.hpp"
#include "fed/metrics.hpp"
#include "fed/npy.hpp"
#include "fed/synth.hpp"
#include "test_support.hpp"

namespace fed {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

SynthConfig small() {
  SynthConfig c;
  c.samples = 6;
  c.height = 32;
  c.width = 40;
  c.seed = 5;
  return c;
}

TEST(Synth, ByteIdenticalDirectories) {
  TempDir a, b;
  synth_generate(small(), a.path());
  synth_generate(small(), b.path());
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a.path());
    ASSERT_TRUE(fs::exists(b.path() / rel)) << rel;
    EXPECT_EQ(read_file(entry.path()), read_file(b.path() / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 2u + 3u * 6u);
}

TEST(Synth, SeedChangesOutput) {
  SynthConfig c = small();
  const DatasetSample a = synth_sample(c, 0);
  c.seed = 6;
  EXPECT_NE(synth_sample(c, 0).logits, a.logits);
}

TEST(Synth, NoPlantedNegativesGivesFewFlips) {
  SynthConfig c = small();
  c.rho_idm = c.rho_ood = 0.0;
  std::uint64_t neg = 0, px = 0;
  for (std::size_t i = 0; i < c.samples; ++i) {
    const DatasetSample s = synth_sample(c, i);
    const PixelLabelMap m = binary_labels(s.logits, *s.labels);
    for (std::int32_t v : m.m.data) neg += v == kNegative;
    px += m.m.size();
  }
  const double frac = static_cast<double>(neg) / static_cast<double>(px);
  RecordProperty("noise_flip_fraction", std::to_string(frac));
  EXPECT_LE(frac, 0.01);
}

TEST(Synth, EnergyGapAndVoidFraction) {
  TempDir dir;
  const SynthConfig c = small();
  const auto report = synth_generate(c, dir.path());
  const DatasetManifest manifest = read_dataset_manifest(dir.path());
  double id_sum = 0, ood_sum = 0;
  std::uint64_t id_n = 0, ood_n = 0;
  ScoredPixels sp;
  for (const std::string& id : manifest.sample_ids) {
    const DatasetSample s = read_dataset_sample(dir.path(), manifest, id);
    const Tensor neg_energy = free_energy(s.logits);
    for (std::size_t p = 0; p < neg_energy.size(); ++p) {
      const bool ood = (*s.labels)[p] == kVoidLabel;
      (ood ? ood_sum : id_sum) += -neg_energy[p];
      ++(ood ? ood_n : id_n);
      sp.append(-neg_energy[p], ood);
    }
  }
  EXPECT_GE(ood_sum / ood_n - id_sum / id_n, c.energy_gap / 2.0);
  EXPECT_GE(auroc(sp), 0.9);
  EXPECT_EQ(report["planted_ood"].get<std::uint64_t>(), ood_n);
  EXPECT_EQ(report["planted_ood_fraction"].get<double>(), report["measured_void_fraction"].get<double>());
}

TEST(Synth, ShapesAndEmbeddings) {
  SynthConfig c = small();
  c.embedding_dims = 0;
  const DatasetSample s = synth_sample(c, 3);
  EXPECT_EQ(s.logits.shape, (Shape{8, 32, 40}));
  EXPECT_FALSE(s.embeddings.has_value());
  EXPECT_EQ(synth_sample(small(), 3).embeddings->shape, (Shape{16, 32, 40}));
}

TEST(Synth, Validation) {
  SynthConfig c;
  c.rho_idm = 0.5;
  c.rho_ood = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SynthConfig{};
  c.margin_id = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SynthConfig{};
  c.classes = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace fed
