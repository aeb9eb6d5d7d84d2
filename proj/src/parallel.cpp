#include "ope_meso/parallel.hpp"

#include <atomic>
#include <string>

namespace ope {

namespace {
std::atomic<int> g_threads{0};
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("OPE_MESO_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (...) {
    }
  }
  return 1;
}

void set_default_threads(int threads) { g_threads = std::max(1, threads); }

int default_threads() {
  const int t = g_threads.load();
  return t > 0 ? t : resolve_threads(0);
}

}  // namespace ope
