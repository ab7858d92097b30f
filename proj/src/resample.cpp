#include "rotalith/resample.hpp"

#include <algorithm>
#include <cmath>

#include "rotalith/parallel.hpp"

namespace rotalith {

namespace {

// Lower corner index and fractional offset along one axis.
struct Axis {
  int lo = 0;
  int hi = 0;
  double t = 0.0;
};

Axis periodic_axis(double u, int n) {
  const double fl = std::floor(u);
  Axis a;
  a.lo = ((static_cast<int>(fl) % n) + n) % n;
  a.hi = (a.lo + 1) % n;
  a.t = u - fl;
  return a;
}

Axis clamped_axis(double u, int n) {
  u = std::clamp(u, 0.0, n - 1.0);
  Axis a;
  a.lo = std::min(static_cast<int>(std::floor(u)), n - 2);
  a.hi = a.lo + 1;
  a.t = u - a.lo;
  return a;
}

}  // namespace

FeatureMatrix trilinear_sample(const SphericalGrid& grid, std::span<const SphericalPoint> points) {
  const int bandwidth = grid.bandwidth();
  const int n = grid.side();
  const int channels = grid.channels();
  FeatureMatrix out(static_cast<Eigen::Index>(points.size()), channels);

  parallel_for(points.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const SphericalPoint& s = points[p];
      // Continuous indices: alpha_i = pi i / B, beta_j = pi (2j+1) / 4B, h_k = k / 2B.
      const Axis a = periodic_axis(s.alpha * bandwidth / kPi, n);
      const Axis b = clamped_axis(s.beta * n / kPi - 0.5, n);
      const Axis c = clamped_axis(s.h * n, n);
      for (int ch = 0; ch < channels; ++ch) {
        double acc = 0.0;
        for (int da = 0; da < 2; ++da) {
          const double wa = da ? a.t : 1.0 - a.t;
          const int i = da ? a.hi : a.lo;
          for (int db = 0; db < 2; ++db) {
            const double wb = db ? b.t : 1.0 - b.t;
            const int j = db ? b.hi : b.lo;
            for (int dc = 0; dc < 2; ++dc) {
              const double wc = dc ? c.t : 1.0 - c.t;
              const int k = dc ? c.hi : c.lo;
              acc += wa * wb * wc * grid.at(i, j, k, ch);
            }
          }
        }
        out(static_cast<Eigen::Index>(p), ch) = acc;
      }
    }
  });
  return out;
}

}  // namespace rotalith
