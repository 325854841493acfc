// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// Deterministic synthetic segmentation outputs with planted correct,
// misclassified (IDM) and out-of-distribution (OOD) regions.

#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "fed/tensor_store.hpp"

namespace fed {

struct SynthConfig {
  std::size_t classes = 8;          // C
  std::size_t embedding_dims = 16;  // V
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t samples = 64;
  double rho_idm = 0.1;
  double rho_ood = 0.1;
  double margin_id = 4.0;
  double energy_gap = 3.0;
  double noise_std = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Noise-free -E(x) of a correctly classified pixel after the global logit
/// offset. Keeping it below zero leaves the energy pair unclamped.
inline constexpr double kSynthIdNegEnergy = -1.5;

struct SynthTruth {
  std::uint64_t pixels = 0;
  std::uint64_t planted_ood = 0;
  std::uint64_t planted_idm = 0;
  std::uint64_t noise_flips = 0;        // planted-correct pixels whose argmax differs
  std::uint64_t idm_reverted = 0;       // planted-IDM pixels whose argmax is still right
};

/// Generates one sample in memory.
DatasetSample synth_sample(const SynthConfig& config, std::size_t index, SynthTruth* truth = nullptr);

/// Writes the dataset (manifest, per-sample NPY files) and truth_report.json
/// under `out_dir`; returns the truth report.
nlohmann::json synth_generate(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace fed
