#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rotalith/geometry.hpp"

namespace rotalith {

enum class ToyShape { sphere, cube, cylinder };

std::string to_string(ToyShape s);
/// Throws ValidationError for an unknown name.
ToyShape parse_toy_shape(const std::string& name);

struct ToyCloud {
  std::vector<Vec3> points;
  std::vector<int> parts;  ///< sphere: hemisphere, cube: face, cylinder: side/top/bottom
  ToyShape shape = ToyShape::sphere;
  int label = 0;           ///< index of the shape in the requested class list
};

/// Area-uniform surface samples of the unit sphere, the [-1,1]^3 cube or
/// the radius-1, height-2 cylinder, plus isotropic Gaussian noise. Not
/// normalized.
ToyCloud toy_sample(ToyShape shape, std::size_t n_points, double noise_sigma, std::mt19937_64& rng);

/// n_per_class clouds per shape, grouped by class, each normalized to the
/// unit ball. Every cloud draws from its own stream derived from the seed.
std::vector<ToyCloud> toy_synth(std::span<const ToyShape> classes, std::size_t n_per_class,
                                std::size_t n_points, double noise_sigma, std::uint64_t seed);

}  // namespace rotalith
