// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// NPY (format version 1.0) encoding and decoding, plus the small file helpers
// shared by the dataset and model stores.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "fed/array.hpp"

namespace fed {

enum class DType { kFloat16, kFloat32, kFloat64, kUInt8, kInt32, kInt64 };

std::string_view dtype_descr(DType dtype);
std::size_t dtype_size(DType dtype);

/// Raw decoded NPY payload: C-order, little-endian element bytes.
struct NpyBlob {
  DType dtype = DType::kFloat64;
  Shape shape;
  std::string bytes;
};

/// Parses an in-memory .npy file. `source` names the file in error messages.
NpyBlob decode_npy(std::string_view file, const std::string& source);
std::string encode_npy(DType dtype, const Shape& shape, std::string_view bytes);

/// Converts any real dtype (f2/f4/f8) to double; rejects integer payloads.
Tensor blob_to_real(const NpyBlob& blob, const std::string& source);
/// Converts integer dtypes (u1/i4/i8) to int32; rejects real payloads.
LabelMap blob_to_labels(const NpyBlob& blob, const std::string& source);

std::string encode_real(const Tensor& t, DType dtype);
std::string encode_labels(const LabelMap& labels);

Tensor load_real_npy(const std::filesystem::path& path);
LabelMap load_label_npy(const std::filesystem::path& path);
void save_real_npy(const std::filesystem::path& path, const Tensor& t,
                   DType dtype = DType::kFloat32);
void save_label_npy(const std::filesystem::path& path, const LabelMap& labels);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace fed
