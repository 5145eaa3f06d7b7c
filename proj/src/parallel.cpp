#include "rbr/parallel.hpp"

#include <cstdlib>
#include <string>

namespace rbr {

unsigned default_thread_count() {
  const char* env = std::getenv("RBR_THREADS");
  if (env == nullptr) return 1;
  try {
    const long value = std::stol(env);
    if (value >= 1 && value <= 1024) return static_cast<unsigned>(value);
  } catch (...) {
  }
  return 1;
}

}  // namespace rbr
