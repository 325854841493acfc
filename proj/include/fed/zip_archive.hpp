// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

// Minimal ZIP container with stored (uncompressed) entries. Entry order is
// preserved and timestamps are fixed, so equal inputs give equal bytes.

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fed {

struct ZipEntry {
  std::string name;
  std::string data;
};

std::string zip_encode(const std::vector<ZipEntry>& entries);

/// Throws FormatError on truncation, CRC mismatch, or compressed entries.
std::vector<ZipEntry> zip_decode(std::string_view archive, const std::string& source);

}  // namespace fed
