#include "jointdep/parallel.hpp"

#include <cstdlib>
#include <string>

namespace jointdep {

int default_threads() {
  if (const char* env = std::getenv("JOINTDEP_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace jointdep
