#pragma once

#include <cstddef>
#include <functional>

namespace sria {

/// Hardware concurrency, at least 1.
unsigned default_worker_count();

/// Runs body(i) for i in [0, count) on `workers` threads. Indices are claimed
/// dynamically, so `body` must not depend on execution order. The first
/// exception thrown by any call is rethrown after all threads join.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace sria
