// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace fed {

/// Worker count: FED_THREADS if set to a positive integer, otherwise the
/// hardware concurrency.
std::size_t thread_budget();

/// Runs fn(i) for i in [0, n) on up to thread_budget() threads. Every index
/// is processed even if one throws; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fed
