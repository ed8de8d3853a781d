#include "weedpilot/core.hpp"

#include <thread>

namespace weedpilot {

int hardware_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace weedpilot
