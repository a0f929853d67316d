#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace debiasreg {

// Worker count: min(hardware concurrency, DEBIAS_THREADS when set).
inline unsigned worker_count() {
  unsigned workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  if (const char* env = std::getenv("DEBIAS_THREADS")) {
    const long cap = std::atol(env);
    if (cap >= 1 && static_cast<unsigned>(cap) < workers) {
      workers = static_cast<unsigned>(cap);
    }
  }
  return workers;
}

// Runs fn(i) for i in [0, count) on a small pool. Exceptions from tasks are
// rethrown on the calling thread (first one wins).
inline void parallel_for(long count, const std::function<void(long)>& fn) {
  if (count <= 0) return;
  const unsigned workers = worker_count();
  if (workers == 1 || count == 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  auto body = [&]() {
    while (true) {
      const long i = next.fetch_add(1);
      if (i >= count || failed.load()) break;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        break;
      }
    }
  };
  const unsigned spawn = static_cast<unsigned>(
      std::min<long>(count, static_cast<long>(workers)));
  pool.reserve(spawn);
  for (unsigned w = 0; w < spawn; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace debiasreg
