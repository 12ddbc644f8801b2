#include "hmmkit/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

namespace hmmkit {

int worker_count() {
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("HMMKIT_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap > 0) n = std::min(n, cap);
    } catch (const std::exception&) {
    }
  }
  return std::max(n, 1);
}

}  // namespace hmmkit
