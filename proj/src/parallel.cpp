#include "dbmc/parallel.hpp"

#include <cstdlib>

namespace dbmc {

unsigned default_workers() {
  if (const char* env = std::getenv("DBMC_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 4096) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace dbmc
