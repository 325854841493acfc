// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// On-disk layout of segmentation-output datasets and trained detector
// archives.
//
// Dataset:  ROOT/manifest.json            {"C", "V", "class_names", "samples"}
//           ROOT/<sample_id>/logits.npy     C x H x W  float32
//           ROOT/<sample_id>/labels.npy     H x W      int32, {0..C-1} u {255}
//           ROOT/<sample_id>/embeddings.npy V x H x W  float32 (iff V > 0)
//
// Model:    zip with manifest.json followed by one "<param>.npy" per tensor,
//           in manifest order.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fed/array.hpp"

namespace fed {

struct DatasetSample {
  std::string sample_id;
  Tensor logits;                    // C x H x W
  std::optional<Tensor> embeddings; // V x H x W
  std::optional<LabelMap> labels;   // H x W

  std::size_t classes() const { return logits.dim(0); }
  std::size_t height() const { return logits.dim(1); }
  std::size_t width() const { return logits.dim(2); }
  std::size_t embedding_dims() const { return embeddings ? embeddings->dim(0) : 0; }
};

struct DatasetManifest {
  std::size_t classes = 0;
  std::size_t embedding_dims = 0;
  std::vector<std::string> class_names;
  std::vector<std::string> sample_ids;
  std::string model_id;  // optional provenance from the exporter
};

enum class LabelPolicy { kRequired, kOptional };

DatasetSample read_sample(const std::filesystem::path& dir,
                          LabelPolicy labels = LabelPolicy::kRequired);
void write_sample(const std::filesystem::path& dir, const DatasetSample& sample);

DatasetManifest read_dataset_manifest(const std::filesystem::path& root);
void write_dataset_manifest(const std::filesystem::path& root, const DatasetManifest& manifest);

/// Reads one sample of a dataset and checks it against the manifest
/// (class count, embedding presence and width).
DatasetSample read_dataset_sample(const std::filesystem::path& root,
                                  const DatasetManifest& manifest,
                                  const std::string& sample_id,
                                  LabelPolicy labels = LabelPolicy::kRequired);

inline constexpr int kModelArchiveVersion = 1;

struct ModelManifest {
  int version = kModelArchiveVersion;
  std::size_t classes = 0;         // C of the segmentation model it was trained on
  std::size_t embedding_dims = 0;  // V
  std::size_t blocks = 0;          // L
  std::size_t cond_channels = 0;   // P
  std::size_t kernel = 0;          // K
  std::size_t hidden_width = 0;
  std::string cov_mode;
  std::uint64_t seed = 0;
  double dropout_rate = 0.0;
  double energy_clamp_eps = 0.0;

  friend bool operator==(const ModelManifest&, const ModelManifest&) = default;
};

struct ModelArchive {
  ModelManifest manifest;
  std::vector<std::pair<std::string, Tensor>> params;

  friend bool operator==(const ModelArchive&, const ModelArchive&) = default;
};

std::string encode_model(const ModelArchive& archive);
ModelArchive decode_model(std::string_view bytes, const std::string& source);
void write_model(const ModelArchive& archive, const std::filesystem::path& path);
ModelArchive read_model(const std::filesystem::path& path);

}  // namespace fed
