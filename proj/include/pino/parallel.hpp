#pragma once

#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace pino {

/// Worker count: PINO_THREADS if set, else hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("PINO_THREADS")) {
    long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Run f(i) for i in [0, n) across worker threads.  Results must be written
/// to per-index slots; any exception is rethrown on the calling thread.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
  const unsigned workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pino
