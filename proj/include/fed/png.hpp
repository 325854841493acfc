// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fed/array.hpp"

namespace fed {

/// 8-bit grey level of a score in [0, 1]: floor(score * 255 + 0.5), clamped.
std::uint8_t score_to_gray(double score);

std::vector<std::uint8_t> score_to_gray(const Tensor& scores);

/// Writes an H x W map as an 8-bit greyscale PNG.
void write_score_png(const std::filesystem::path& path, const Tensor& scores);

}  // namespace fed
