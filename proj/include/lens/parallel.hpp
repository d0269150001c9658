// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace lens {

/// Worker count for within-stage parallelism: hardware concurrency, capped by
/// the LENS_THREADS environment variable when set.
std::size_t thread_count();

/// Splits [0, n) into contiguous chunks, one per worker, and runs body(begin, end)
/// on each. Chunk boundaries depend only on n and the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace lens
