#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace rotalith {

using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Point of the unit ball in augmented spherical coordinates: direction
/// (alpha, beta) on S^2 plus radial distance h.
struct SphericalPoint {
  double alpha = 0.0;  ///< azimuth, [0, 2pi)
  double beta = 0.0;   ///< polar angle, [0, pi]
  double h = 0.0;      ///< radial distance, [0, 1]
};

/// ZYZ Euler angles, R = Z(alpha) Y(beta) Z(gamma).
struct EulerZYZ {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// A proper rotation. Construction from an arbitrary matrix validates
/// orthonormality and determinant to 1e-10.
class RotationMatrix {
 public:
  RotationMatrix() : m_(Eigen::Matrix3d::Identity()) {}

  static RotationMatrix from_matrix(const Eigen::Matrix3d& m);
  static RotationMatrix about_z(double angle);
  static RotationMatrix about_y(double angle);

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  RotationMatrix operator*(const RotationMatrix& other) const {
    return RotationMatrix(m_ * other.m_);
  }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  RotationMatrix inverse() const { return RotationMatrix(m_.transpose()); }

 private:
  explicit RotationMatrix(const Eigen::Matrix3d& m) : m_(m) {}
  Eigen::Matrix3d m_;
};

/// Wraps an angle into [0, 2pi).
double wrap_angle(double a);

/// Unit direction Z(alpha) Y(beta) n for n the north pole.
Vec3 direction(double alpha, double beta);

SphericalPoint cart_to_spherical(const Vec3& v);
Vec3 spherical_to_cart(const SphericalPoint& s);

RotationMatrix euler_to_matrix(const EulerZYZ& e);
EulerZYZ matrix_to_euler(const RotationMatrix& r);

/// T(s, h) = Z(alpha) Y(beta) Z(2 pi h).
RotationMatrix tmap(const SphericalPoint& s);
SphericalPoint tmap_inv(const RotationMatrix& r);

/// Q applied to a point of the ball: the direction rotates, h is kept.
SphericalPoint rotate(const RotationMatrix& q, const SphericalPoint& s);

/// theta with T(Q s) = Q T(s) Z(theta). Empty when Q s lands within 1e-9
/// of a pole, where the Euler decomposition is singular.
std::optional<double> coset_angle(const RotationMatrix& q,
                                  const SphericalPoint& s);

/// Haar-uniform rotation from a normalized quaternion of four standard
/// normals.
RotationMatrix random_rotation(std::mt19937_64& rng);
RotationMatrix random_rotation(std::uint64_t seed);

std::vector<Vec3> rotate_points(const RotationMatrix& q,
                                std::span<const Vec3> points);

}  // namespace rotalith
