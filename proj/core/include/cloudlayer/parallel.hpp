#pragma once

#include <cstddef>
#include <functional>

namespace cloudlayer {

/// Worker count: CLOUDLAYER_THREADS if set to a positive integer, otherwise
/// std::thread::hardware_concurrency() (at least 1).
std::size_t thread_count();

/// Calls body(k) for k in [0, n), split into contiguous static chunks across
/// thread_count() workers. Results must not depend on scheduling; each k is
/// visited exactly once. Exceptions from workers are rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cloudlayer
