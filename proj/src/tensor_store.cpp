// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/tensor_store.hpp"

#include <nlohmann/json.hpp>

#include <set>

#include "fed/error.hpp"
#include "fed/npy.hpp"
#include "fed/zip_archive.hpp"

namespace fed {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError(p.string() + ": missing file");
}

std::string describe(const fs::path& p, const Shape& got, const std::string& expected) {
  return p.string() + ": shape " + shape_string(got) + " does not match expected " + expected;
}

}  // namespace

DatasetSample read_sample(const fs::path& dir, LabelPolicy policy) {
  DatasetSample s;
  s.sample_id = dir.filename().string();
  if (s.sample_id.empty()) s.sample_id = dir.parent_path().filename().string();

  const auto logits_path = dir / "logits.npy";
  require_file(logits_path);
  s.logits = load_real_npy(logits_path);
  if (s.logits.rank() != 3 || s.logits.dim(0) < 2) {
    throw ShapeError(describe(logits_path, s.logits.shape, "(C >= 2, H, W)"));
  }
  const std::size_t c = s.logits.dim(0);
  const std::size_t h = s.logits.dim(1);
  const std::size_t w = s.logits.dim(2);
  const std::string spatial = "(" + std::to_string(h) + ", " + std::to_string(w) + ")";

  const auto labels_path = dir / "labels.npy";
  if (fs::exists(labels_path)) {
    LabelMap labels = load_label_npy(labels_path);
    if (labels.shape != Shape{h, w}) {
      throw ShapeError(describe(labels_path, labels.shape, spatial));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto v = labels[i];
      if (v != kVoidLabel && (v < 0 || static_cast<std::size_t>(v) >= c)) {
        throw FormatError(labels_path.string() + ": label " + std::to_string(v) +
                          " at flat index " + std::to_string(i) + " outside {0.." +
                          std::to_string(c - 1) + "} u {255}");
      }
    }
    s.labels = std::move(labels);
  } else if (policy == LabelPolicy::kRequired) {
    require_file(labels_path);
  }

  const auto emb_path = dir / "embeddings.npy";
  if (fs::exists(emb_path)) {
    Tensor emb = load_real_npy(emb_path);
    if (emb.rank() != 3 || emb.dim(1) != h || emb.dim(2) != w || emb.dim(0) == 0) {
      throw ShapeError(describe(emb_path, emb.shape, "(V, " + std::to_string(h) + ", " +
                                                         std::to_string(w) + ")"));
    }
    s.embeddings = std::move(emb);
  }
  return s;
}

void write_sample(const fs::path& dir, const DatasetSample& sample) {
  fs::create_directories(dir);
  save_real_npy(dir / "logits.npy", sample.logits, DType::kFloat32);
  if (sample.labels) save_label_npy(dir / "labels.npy", *sample.labels);
  if (sample.embeddings) save_real_npy(dir / "embeddings.npy", *sample.embeddings, DType::kFloat32);
}

DatasetManifest read_dataset_manifest(const fs::path& root) {
  const auto path = root / "manifest.json";
  require_file(path);
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.classes = j.at("C").get<std::size_t>();
    m.embedding_dims = j.value("V", std::size_t{0});
    m.class_names = j.value("class_names", std::vector<std::string>{});
    m.sample_ids = j.at("samples").get<std::vector<std::string>>();
    m.model_id = j.value("model_id", std::string{});
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (m.classes < 2) throw FormatError(path.string() + ": C must be >= 2");
  return m;
}

void write_dataset_manifest(const fs::path& root, const DatasetManifest& m) {
  fs::create_directories(root);
  json j;
  j["C"] = m.classes;
  j["V"] = m.embedding_dims;
  j["class_names"] = m.class_names;
  j["samples"] = m.sample_ids;
  if (!m.model_id.empty()) j["model_id"] = m.model_id;
  write_file_atomic(root / "manifest.json", j.dump(2) + "\n");
}

DatasetSample read_dataset_sample(const fs::path& root, const DatasetManifest& manifest,
                                  const std::string& sample_id, LabelPolicy labels) {
  DatasetSample s = read_sample(root / sample_id, labels);
  s.sample_id = sample_id;
  if (s.classes() != manifest.classes) {
    throw ShapeError((root / sample_id / "logits.npy").string() + ": " +
                     std::to_string(s.classes()) + " classes, manifest declares " +
                     std::to_string(manifest.classes));
  }
  if (manifest.embedding_dims > 0 && !s.embeddings) {
    throw IoError((root / sample_id / "embeddings.npy").string() +
                  ": missing file (manifest declares V = " +
                  std::to_string(manifest.embedding_dims) + ")");
  }
  if (manifest.embedding_dims == 0 && s.embeddings) {
    throw FormatError((root / sample_id / "embeddings.npy").string() +
                      ": present but manifest declares V = 0");
  }
  if (s.embeddings && s.embedding_dims() != manifest.embedding_dims) {
    throw ShapeError((root / sample_id / "embeddings.npy").string() + ": " +
                     std::to_string(s.embedding_dims()) + " channels, manifest declares V = " +
                     std::to_string(manifest.embedding_dims));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Model archives

std::string encode_model(const ModelArchive& archive) {
  const auto& m = archive.manifest;
  json j;
  j["version"] = m.version;
  j["C"] = m.classes;
  j["V"] = m.embedding_dims;
  j["L"] = m.blocks;
  j["P"] = m.cond_channels;
  j["K"] = m.kernel;
  j["hidden_width"] = m.hidden_width;
  j["cov_mode"] = m.cov_mode;
  j["seed"] = m.seed;
  j["dropout_rate"] = m.dropout_rate;
  j["energy_clamp_eps"] = m.energy_clamp_eps;
  json params = json::array();
  for (const auto& [name, t] : archive.params) {
    params.push_back({{"name", name}, {"shape", t.shape}});
  }
  j["parameters"] = params;

  std::vector<ZipEntry> entries;
  entries.push_back({"manifest.json", j.dump(2) + "\n"});
  for (const auto& [name, t] : archive.params) {
    entries.push_back({name + ".npy", encode_real(t, DType::kFloat64)});
  }
  return zip_encode(entries);
}

ModelArchive decode_model(std::string_view bytes, const std::string& source) {
  std::vector<ZipEntry> entries = zip_decode(bytes, source);
  if (entries.empty() || entries.front().name != "manifest.json") {
    throw FormatError(source + ": archive does not start with manifest.json");
  }
  json j;
  try {
    j = json::parse(entries.front().data);
  } catch (const json::exception& e) {
    throw FormatError(source + ": manifest.json: " + e.what());
  }

  ModelArchive a;
  auto& m = a.manifest;
  std::vector<std::pair<std::string, Shape>> declared;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != kModelArchiveVersion) {
      throw FormatError(source + ": archive version " + std::to_string(m.version) +
                        " is not supported (expected " +
                        std::to_string(kModelArchiveVersion) + ")");
    }
    m.classes = j.at("C").get<std::size_t>();
    m.embedding_dims = j.at("V").get<std::size_t>();
    m.blocks = j.at("L").get<std::size_t>();
    m.cond_channels = j.at("P").get<std::size_t>();
    m.kernel = j.at("K").get<std::size_t>();
    m.hidden_width = j.at("hidden_width").get<std::size_t>();
    m.cov_mode = j.at("cov_mode").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.dropout_rate = j.at("dropout_rate").get<double>();
    m.energy_clamp_eps = j.at("energy_clamp_eps").get<double>();
    for (const auto& p : j.at("parameters")) {
      declared.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<Shape>());
    }
  } catch (const json::exception& e) {
    throw FormatError(source + ": manifest.json: " + e.what());
  }

  std::set<std::string> seen;
  for (const auto& [name, _] : declared) {
    if (!seen.insert(name).second) {
      throw FormatError(source + ": parameter '" + name + "' declared twice");
    }
  }
  std::set<std::string> blobs;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (!blobs.insert(entries[i].name).second) {
      throw FormatError(source + ": duplicate blob '" + entries[i].name + "'");
    }
    const auto& n = entries[i].name;
    if (n.size() < 4 || n.substr(n.size() - 4) != ".npy" ||
        !seen.contains(n.substr(0, n.size() - 4))) {
      throw FormatError(source + ": blob '" + n + "' is not declared in the manifest");
    }
  }

  for (const auto& [name, shape] : declared) {
    const std::string blob_name = name + ".npy";
    auto it = std::find_if(entries.begin() + 1, entries.end(),
                           [&](const ZipEntry& e) { return e.name == blob_name; });
    if (it == entries.end()) {
      throw FormatError(source + ": missing blob for parameter '" + name + "'");
    }
    const std::string where = source + ":" + blob_name;
    Tensor t = blob_to_real(decode_npy(it->data, where), where);
    if (t.shape != shape) {
      throw ShapeError(where + ": blob shape " + shape_string(t.shape) +
                       " does not match declared " + shape_string(shape));
    }
    a.params.emplace_back(name, std::move(t));
  }
  return a;
}

void write_model(const ModelArchive& archive, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, encode_model(archive));
}

ModelArchive read_model(const fs::path& path) {
  return decode_model(read_file(path), path.string());
}

}  // namespace fed
