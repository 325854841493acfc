// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fed {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing files, short reads, failed writes.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported on-disk content (NPY header, zip entry, manifest).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Tensors whose shapes disagree with each other or with a manifest.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or configuration files. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in inputs or intermediate values.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fed
