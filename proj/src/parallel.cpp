#include "kvf/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

namespace kvf {

namespace {

std::atomic<unsigned> g_thread_limit{0};

unsigned worker_count(std::size_t blocks) {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  unsigned limit = g_thread_limit.load();
  unsigned w = limit == 0 ? hw : std::min(hw, limit);
  return static_cast<unsigned>(std::min<std::size_t>(w, blocks));
}

}  // namespace

void set_thread_limit(unsigned limit) { g_thread_limit.store(limit); }

unsigned thread_limit() { return g_thread_limit.load(); }

void configure_threads_from_env() {
  if (const char* env = std::getenv("KVF_THREADS")) {
    try {
      int v = std::stoi(env);
      if (v > 0) set_thread_limit(static_cast<unsigned>(v));
    } catch (...) {
      // ignore malformed values
    }
  }
}

void parallel_blocks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t blocks = (count + kSiteBlock - 1) / kSiteBlock;
  const unsigned workers = worker_count(blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) body(b * kSiteBlock, std::min(count, (b + 1) * kSiteBlock));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t b = next++; b < blocks; b = next++)
      body(b * kSiteBlock, std::min(count, (b + 1) * kSiteBlock));
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

std::vector<double> parallel_sum(std::size_t count, std::size_t width,
                                 const std::function<void(std::size_t, double*)>& site_fn) {
  const std::size_t blocks = (count + kSiteBlock - 1) / kSiteBlock;
  std::vector<double> partial(blocks * width, 0.0);
  parallel_blocks(count, [&](std::size_t begin, std::size_t end) {
    double* acc = partial.data() + (begin / kSiteBlock) * width;
    for (std::size_t s = begin; s < end; ++s) site_fn(s, acc);
  });
  std::vector<double> total(width, 0.0);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t k = 0; k < width; ++k) total[k] += partial[b * width + k];
  return total;
}

}  // namespace kvf
