#include "rotalith/toy.hpp"

#include <cmath>

#include "rotalith/errors.hpp"
#include "rotalith/voxelizer.hpp"

namespace rotalith {

std::string to_string(ToyShape s) {
  switch (s) {
    case ToyShape::sphere: return "sphere";
    case ToyShape::cube: return "cube";
    case ToyShape::cylinder: return "cylinder";
  }
  return "unknown";
}

ToyShape parse_toy_shape(const std::string& name) {
  if (name == "sphere") return ToyShape::sphere;
  if (name == "cube") return ToyShape::cube;
  if (name == "cylinder") return ToyShape::cylinder;
  throw ValidationError("unknown toy shape '" + name + "'");
}

ToyCloud toy_sample(ToyShape shape, std::size_t n_points, double noise_sigma,
                    std::mt19937_64& rng) {
  if (noise_sigma < 0.0) throw ValidationError("noise sigma must be non-negative");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::normal_distribution<double> normal(0.0, 1.0);

  ToyCloud cloud;
  cloud.shape = shape;
  cloud.points.reserve(n_points);
  cloud.parts.reserve(n_points);
  for (std::size_t n = 0; n < n_points; ++n) {
    Vec3 p;
    int part = 0;
    switch (shape) {
      case ToyShape::sphere: {
        do {
          p = Vec3(normal(rng), normal(rng), normal(rng));
        } while (p.norm() < 1e-12);
        p.normalize();
        part = p.z() >= 0.0 ? 0 : 1;
        break;
      }
      case ToyShape::cube: {
        part = std::uniform_int_distribution<int>(0, 5)(rng);
        const int axis = part / 2;
        const double sign = part % 2 == 0 ? 1.0 : -1.0;
        p[axis] = sign;
        p[(axis + 1) % 3] = unit(rng);
        p[(axis + 2) % 3] = unit(rng);
        break;
      }
      case ToyShape::cylinder: {
        // Lateral area 4 pi, each cap pi.
        const double u = std::uniform_real_distribution<double>(0.0, 6.0)(rng);
        if (u < 4.0) {
          const double t = angle(rng);
          p = Vec3(std::cos(t), std::sin(t), unit(rng));
          part = 0;
        } else {
          const double r = std::sqrt(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
          const double t = angle(rng);
          const bool top = u < 5.0;
          p = Vec3(r * std::cos(t), r * std::sin(t), top ? 1.0 : -1.0);
          part = top ? 1 : 2;
        }
        break;
      }
    }
    if (noise_sigma > 0.0) {
      p += noise_sigma * Vec3(normal(rng), normal(rng), normal(rng));
    }
    cloud.points.push_back(p);
    cloud.parts.push_back(part);
  }
  return cloud;
}

std::vector<ToyCloud> toy_synth(std::span<const ToyShape> classes, std::size_t n_per_class,
                                std::size_t n_points, double noise_sigma, std::uint64_t seed) {
  if (n_points < 64) throw ValidationError("toy clouds need at least 64 points");
  if (classes.empty()) throw ValidationError("no toy classes requested");
  std::vector<ToyCloud> out;
  out.reserve(classes.size() * n_per_class);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      ToyCloud cloud = toy_sample(classes[c], n_points, noise_sigma, rng);
      cloud.points = normalize_cloud(cloud.points);
      cloud.label = static_cast<int>(c);
      out.push_back(std::move(cloud));
    }
  }
  return out;
}

}  // namespace rotalith
