// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace srgdiff {

/// Worker count: 1 when SRGDIFF_DETERMINISTIC=1, else SRGDIFF_THREADS when
/// set to a positive integer, else the hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) over worker_count() threads with a static
/// contiguous partition. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace srgdiff
