// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>

#include "fed/config.hpp"
#include "fed/error.hpp"

namespace fed {
namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(TrainConfigFile, ParsesEveryKey) {
  const TrainFile f = parse_train_config(R"(
L = 4
P = 8
K = 5
hidden_width = 16
dropout_rate = 0.1
cov_mode = "diag"
energy_clamp_eps = 1e-5
lr_init = 2e-3
warmup_iters = 10
decay_every = 100
total_iters = 300
batch_size = 2
weight_decay = 0
crop = [16, 24]
seed = 7
grad_clip = 5.0
)");
  EXPECT_EQ(f.detector.flow.blocks, 4u);
  EXPECT_EQ(f.detector.flow.cond_channels, 8u);
  EXPECT_EQ(f.detector.flow.kernel, 5u);
  EXPECT_EQ(f.detector.flow.hidden, 16u);
  EXPECT_EQ(f.detector.flow.dropout, 0.1);
  EXPECT_EQ(f.detector.cov_mode, CovMode::kDiag);
  EXPECT_EQ(f.detector.energy_clamp_eps, 1e-5);
  EXPECT_EQ(f.train.lr_init, 2e-3);
  EXPECT_EQ(f.train.total_iters, 300u);
  EXPECT_EQ(f.train.weight_decay, 0.0);
  EXPECT_EQ(f.train.crop_height, 16u);
  EXPECT_EQ(f.train.crop_width, 24u);
  EXPECT_EQ(f.train.seed, 7u);
  EXPECT_EQ(f.train.grad_clip, 5.0);
}

TEST(TrainConfigFile, DefaultsWhenEmpty) {
  const TrainFile f = parse_train_config("");
  EXPECT_EQ(f.detector.flow.blocks, 8u);
  EXPECT_EQ(f.train.total_iters, 50000u);
  EXPECT_FALSE(f.train.grad_clip.has_value());
}

TEST(TrainConfigFile, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of([] { parse_train_config("L = 4\n\nbogus = 1\n", "c.toml"); }).find("c.toml:3"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_train_config("L = 4\nK = \"seven\"\n", "c.toml"); }).find("c.toml:2"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_train_config("L = 4\nK = = 3\n", "c.toml"); }).find("c.toml:2"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_train_config("crop = [1]\n", "c.toml"); }).find("c.toml:1"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_train_config("cov_mode = \"dense\"\n", "c.toml"); }).find("c.toml:1"),
            std::string::npos);
  EXPECT_FALSE(error_of([] { parse_train_config("L = 3\n"); }).empty());
  EXPECT_FALSE(error_of([] { parse_train_config("seed = -1\n"); }).empty());
}

TEST(SynthConfigFile, Parses) {
  const SynthConfig c = parse_synth_config("C = 5\nV = 0\nH = 16\nW = 20\nn_samples = 3\nrho_idm = 0.2\n"
                                           "rho_ood = 0.05\nmargin_id = 5\nenergy_gap = 2.5\n"
                                           "noise_std = 0.1\nseed = 9\n");
  EXPECT_EQ(c.classes, 5u);
  EXPECT_EQ(c.embedding_dims, 0u);
  EXPECT_EQ(c.width, 20u);
  EXPECT_EQ(c.margin_id, 5.0);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_FALSE(error_of([] { parse_synth_config("rho_idm = 0.6\nrho_ood = 0.6\n"); }).empty());
  EXPECT_NE(error_of([] { parse_synth_config("L = 2\n", "s.toml"); }).find("s.toml:1"), std::string::npos);
}

TEST(ShippedConfigs, AllParse) {
  const std::filesystem::path dir = FED_CONFIG_DIR;
  EXPECT_EQ(load_synth_config(dir / "synth.toml").seed, 1u);
  EXPECT_EQ(load_train_config(dir / "train_small.toml").train.total_iters, 2000u);
  const TrainFile full = load_train_config(dir / "train_full.toml");
  EXPECT_EQ(full.detector.flow.blocks, 8u);
  EXPECT_EQ(full.train.warmup_iters, 4000u);
}

}  // namespace
}  // namespace fed
