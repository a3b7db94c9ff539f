#include "saelab/common.hpp"

#include <cstdlib>
#include <thread>

namespace saelab {

int thread_cap() {
  if (const char* env = std::getenv("SAE_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw InvalidArgument("SAE_LAB_THREADS must be a positive integer");
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace saelab
