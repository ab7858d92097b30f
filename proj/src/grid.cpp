#include "rotalith/grid.hpp"

#include <algorithm>
#include <cmath>

#include "rotalith/errors.hpp"

namespace rotalith {

SphericalGrid::SphericalGrid(int bandwidth, int channels)
    : bandwidth_(bandwidth), channels_(channels) {
  if (bandwidth < 1 || channels < 1) {
    throw ValidationError("grid needs bandwidth >= 1 and channels >= 1");
  }
  const std::size_t n = static_cast<std::size_t>(side());
  data_.assign(n * n * n * channels, 0.0);
}

S2Signal::S2Signal(int bandwidth, int channels)
    : bandwidth_(bandwidth), channels_(channels) {
  if (bandwidth < 1 || channels < 1) {
    throw ValidationError("signal needs bandwidth >= 1 and channels >= 1");
  }
  const std::size_t n = static_cast<std::size_t>(side());
  data_.assign(n * n * channels, 0.0);
}

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

double max_abs_diff(const SphericalGrid& a, const SphericalGrid& b) {
  if (a.bandwidth() != b.bandwidth() || a.channels() != b.channels()) {
    throw ValidationError("grid shape mismatch");
  }
  return max_abs_diff(a.data(), b.data());
}

double max_abs_diff(const S2Signal& a, const S2Signal& b) {
  if (a.bandwidth() != b.bandwidth() || a.channels() != b.channels()) {
    throw ValidationError("signal shape mismatch");
  }
  return max_abs_diff(a.data(), b.data());
}

}  // namespace rotalith
