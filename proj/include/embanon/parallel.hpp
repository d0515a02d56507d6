// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace embanon {

/// Worker count from EMBANON_WORKERS (positive integer), else hardware
/// concurrency, else 1. An unparsable value raises ConfigError.
std::size_t worker_count();

/// Calls body(begin, end) over disjoint contiguous chunks covering [0, n).
/// Chunks never depend on the worker count, so per-index results are
/// identical however many threads run them. Exceptions are rethrown on the caller.
void parallel_for(std::size_t n, std::size_t chunk, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace embanon
