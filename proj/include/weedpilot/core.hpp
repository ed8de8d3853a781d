#ifndef WEEDPILOT_CORE_HPP
#define WEEDPILOT_CORE_HPP

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace weedpilot {

// Thrown for malformed inputs (bad arguments, bad files, shape mismatches).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// WEEDPILOT_DETERMINISTIC=1 forces bit-reproducible runs: all internal
// parallelism collapses to a single worker. Read once per process.
inline bool deterministic() {
  static const bool flag = [] {
    const char* v = std::getenv("WEEDPILOT_DETERMINISTIC");
    return v != nullptr && v[0] == '1';
  }();
  return flag;
}

int hardware_workers();

// Number of workers honoring the deterministic flag.
inline int effective_workers() { return deterministic() ? 1 : hardware_workers(); }

}  // namespace weedpilot

#endif
