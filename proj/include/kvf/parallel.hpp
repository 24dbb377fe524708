#pragma once

// Site-parallel loops with a reduction order that does not depend on the
// number of worker threads: sites are cut into fixed-size blocks, each block is
// summed sequentially, and block sums are combined in block order.

#include <cstddef>
#include <functional>
#include <vector>

namespace kvf {

inline constexpr std::size_t kSiteBlock = 4096;

/// Upper bound on worker threads; 0 means "hardware concurrency".
void set_thread_limit(unsigned limit);
unsigned thread_limit();

/// Reads KVF_THREADS from the environment, if present.
void configure_threads_from_env();

/// Calls body(begin, end) for consecutive site blocks, possibly concurrently.
void parallel_blocks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

/// Deterministic sum of `width` accumulators: site_fn(site, acc) adds into acc[0..width).
std::vector<double> parallel_sum(std::size_t count, std::size_t width,
                                 const std::function<void(std::size_t, double*)>& site_fn);

}  // namespace kvf
