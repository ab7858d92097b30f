#pragma once

#include <cstddef>
#include <functional>

namespace rotalith {

/// Upper bound on worker threads used by the heavy kernels. Defaults to 1.
/// Results never depend on this value: work is split over independent
/// output ranges and every reduction runs in a fixed order.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Calls fn(begin, end) over disjoint chunks covering [0, n).
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace rotalith
