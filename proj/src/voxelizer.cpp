#include "rotalith/voxelizer.hpp"

#include <cmath>

#include "rotalith/errors.hpp"

namespace rotalith {

namespace {

double circular_distance(double a, double b) {
  const double d = std::abs(a - b);
  return std::min(d, kTwoPi - d);
}

}  // namespace

SphericalGrid voxelize(std::span<const Vec3> points, int bandwidth,
                       const SamplingConfig& cfg) {
  if (points.empty()) throw ValidationError("cannot voxelize an empty cloud");
  if (bandwidth < 2) throw ValidationError("voxelize needs bandwidth >= 2");
  if (!(cfg.xi > 0.0)) throw ValidationError("xi must be positive");

  const int n = 2 * bandwidth;
  std::vector<double> beta_window(n);
  for (int j = 0; j < n; ++j) {
    const double eta =
        cfg.mode == SamplingMode::daas ? std::sin(grid_beta(bandwidth, j)) : 1.0;
    beta_window[j] = eta * cfg.xi;
  }

  // Numerator and denominator of the windowed average, per voxel.
  SphericalGrid num(bandwidth, 1);
  std::vector<double> den(num.data().size(), 0.0);

  std::vector<int> hit_i, hit_j, hit_k;
  for (const Vec3& p : points) {
    const SphericalPoint s = cart_to_spherical(p);
    hit_i.clear();
    hit_j.clear();
    hit_k.clear();
    for (int i = 0; i < n; ++i) {
      if (circular_distance(s.alpha, grid_alpha(bandwidth, i)) < cfg.xi) hit_i.push_back(i);
    }
    if (hit_i.empty()) continue;
    for (int j = 0; j < n; ++j) {
      if (std::abs(s.beta - grid_beta(bandwidth, j)) < beta_window[j]) hit_j.push_back(j);
    }
    if (hit_j.empty()) continue;
    for (int k = 0; k < n; ++k) {
      if (std::abs(s.h - grid_h(bandwidth, k)) < cfg.xi) hit_k.push_back(k);
    }
    for (int i : hit_i) {
      for (int j : hit_j) {
        for (int k : hit_k) {
          const std::size_t idx = num.index(i, j, k, 0);
          num.data()[idx] += cfg.xi - std::abs(s.h - grid_h(bandwidth, k));
          den[idx] += 1.0;
        }
      }
    }
  }

  for (std::size_t idx = 0; idx < den.size(); ++idx) {
    num.data()[idx] = den[idx] > 0.0 ? num.data()[idx] / den[idx] : 0.0;
  }
  return num;
}

SphericalGrid grid_shift_alpha(const SphericalGrid& g, int m) {
  SphericalGrid out(g.bandwidth(), g.channels());
  const int n = g.side();
  const int shift = ((m % n) + n) % n;
  for (int i = 0; i < n; ++i) {
    const int dst = (i + shift) % n;
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        for (int c = 0; c < g.channels(); ++c) out.at(dst, j, k, c) = g.at(i, j, k, c);
      }
    }
  }
  return out;
}

std::vector<Vec3> normalize_cloud(std::span<const Vec3> points) {
  if (points.empty()) throw ValidationError("cannot normalize an empty cloud");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double scale = 0.0;
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) {
    out.push_back(p - centroid);
    scale = std::max(scale, out.back().norm());
  }
  if (scale > 0.0) {
    for (Vec3& p : out) p /= scale;
  }
  return out;
}

}  // namespace rotalith
