#pragma once

#include <span>

#include <Eigen/Core>

#include "rotalith/geometry.hpp"
#include "rotalith/grid.hpp"

namespace rotalith {

/// Per-point features, one row per point.
using FeatureMatrix = Eigen::MatrixXd;

/// Trilinear read-out of grid features at arbitrary points of the ball.
/// Each row is the weighted average of the 8 surrounding voxel centers;
/// alpha wraps around 2B, beta and h clamp to the outermost centers.
FeatureMatrix trilinear_sample(const SphericalGrid& grid, std::span<const SphericalPoint> points);

}  // namespace rotalith
