#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ope {

// --threads, then OPE_MESO_THREADS, then 1
int resolve_threads(int requested);
void set_default_threads(int threads);
int default_threads();

// body(begin, end) over contiguous chunks of [0, count)
inline void parallel_for(long count, int threads, const std::function<void(long, long)>& body) {
  threads = std::max(1, std::min<int>(threads, int(std::max(1L, count))));
  if (threads == 1 || count < 2) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  const long chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const long b = long(t) * chunk, e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        body(b, e);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace ope
