#pragma once

#include <span>
#include <vector>

#include "rotalith/geometry.hpp"
#include "rotalith/grid.hpp"

namespace rotalith {

enum class SamplingMode {
  daas,     ///< beta window scaled by sin(beta_j)
  uniform,  ///< fixed-width beta window (ablation baseline)
};

struct SamplingConfig {
  double xi = 1.0 / 32.0;  ///< window half-width, shared by alpha, beta and h
  SamplingMode mode = SamplingMode::daas;
};

/// Builds the single-channel spherical-voxel signal of a cloud lying in the
/// unit ball. Each voxel holds the average of (xi - |h_n - h_k|) over the
/// points inside its alpha/beta/h windows, or 0 when no point falls inside.
/// The alpha distance is measured on the circle.
///
/// Throws ValidationError for an empty cloud, B < 2, xi <= 0, or points
/// outside the ball.
SphericalGrid voxelize(std::span<const Vec3> points, int bandwidth,
                       const SamplingConfig& cfg = {});

/// Circular shift of the alpha index by m (mod 2B).
SphericalGrid grid_shift_alpha(const SphericalGrid& g, int m);

/// Moves the centroid to the origin and scales the farthest point to norm 1.
std::vector<Vec3> normalize_cloud(std::span<const Vec3> points);

}  // namespace rotalith
