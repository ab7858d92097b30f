#include "rotalith/geometry.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "rotalith/errors.hpp"

namespace rotalith {

namespace {

constexpr double kOrthoTol = 1e-10;
constexpr double kBallTol = 1e-9;
constexpr double kGimbalTol = 1e-9;

}  // namespace

RotationMatrix RotationMatrix::from_matrix(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) throw ValidationError("rotation matrix has non-finite entries");
  const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).norm();
  const double det = m.determinant();
  if (ortho > kOrthoTol || std::abs(det - 1.0) > kOrthoTol) {
    throw ValidationError("matrix is not a proper rotation (|R^T R - I| = " +
                          std::to_string(ortho) +
                          ", det = " + std::to_string(det) + ")");
  }
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::about_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::about_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return RotationMatrix(m);
}

double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  // fmod of a tiny negative plus 2pi can round up to exactly 2pi.
  if (w >= kTwoPi) w = 0.0;
  return w;
}

Vec3 direction(double alpha, double beta) {
  const double sb = std::sin(beta);
  return {sb * std::cos(alpha), sb * std::sin(alpha), std::cos(beta)};
}

SphericalPoint cart_to_spherical(const Vec3& v) {
  if (!v.allFinite()) throw ValidationError("point has non-finite coordinates");
  const double norm = v.norm();
  if (norm > 1.0 + kBallTol) {
    throw ValidationError("point lies outside the unit ball (|v| = " +
                          std::to_string(norm) + ")");
  }
  SphericalPoint s;
  s.h = std::min(norm, 1.0);
  if (norm == 0.0) return s;
  const double rho = std::hypot(v.x(), v.y());
  s.beta = std::atan2(rho, v.z());
  s.alpha = rho == 0.0 ? 0.0 : wrap_angle(std::atan2(v.y(), v.x()));
  return s;
}

Vec3 spherical_to_cart(const SphericalPoint& s) {
  return s.h * direction(s.alpha, s.beta);
}

RotationMatrix euler_to_matrix(const EulerZYZ& e) {
  return RotationMatrix::about_z(e.alpha) * RotationMatrix::about_y(e.beta) *
         RotationMatrix::about_z(e.gamma);
}

EulerZYZ matrix_to_euler(const RotationMatrix& r) {
  // R = Z(a) Y(b) Z(g): third column (cos a sin b, sin a sin b, cos b),
  // bottom row (-sin b cos g, sin b sin g, cos b).
  EulerZYZ e;
  const double sb_col = std::hypot(r(0, 2), r(1, 2));
  const double sb_row = std::hypot(r(2, 0), r(2, 1));
  const double sb = 0.5 * (sb_col + sb_row);
  e.beta = std::atan2(sb, r(2, 2));
  if (sb < kGimbalTol) {
    // Gimbal lock: gamma = 0 and alpha carries the whole z-rotation.
    e.gamma = 0.0;
    if (r(2, 2) > 0.0) {
      e.beta = 0.0;
      e.alpha = wrap_angle(std::atan2(r(1, 0), r(0, 0)));
    } else {
      // Z(a) Y(pi) = [[-cos a, -sin a, 0], [-sin a, cos a, 0], [0, 0, -1]]
      e.beta = kPi;
      e.alpha = wrap_angle(std::atan2(-r(1, 0), -r(0, 0)));
    }
    return e;
  }
  e.alpha = wrap_angle(std::atan2(r(1, 2), r(0, 2)));
  e.gamma = wrap_angle(std::atan2(r(2, 1), -r(2, 0)));
  return e;
}

RotationMatrix tmap(const SphericalPoint& s) {
  return euler_to_matrix({s.alpha, s.beta, kTwoPi * s.h});
}

SphericalPoint tmap_inv(const RotationMatrix& r) {
  const EulerZYZ e = matrix_to_euler(r);
  return {e.alpha, e.beta, e.gamma / kTwoPi};
}

SphericalPoint rotate(const RotationMatrix& q, const SphericalPoint& s) {
  const Vec3 d = q * direction(s.alpha, s.beta);
  SphericalPoint out = cart_to_spherical(d.normalized());
  out.h = s.h;
  return out;
}

std::optional<double> coset_angle(const RotationMatrix& q,
                                  const SphericalPoint& s) {
  const RotationMatrix m =
      q * RotationMatrix::about_z(s.alpha) * RotationMatrix::about_y(s.beta);
  if (std::hypot(m(0, 2), m(1, 2)) < kGimbalTol) return std::nullopt;
  const EulerZYZ e = matrix_to_euler(m);
  return -e.gamma;
}

RotationMatrix random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Quaterniond quat;
  double n2 = 0.0;
  do {
    quat = Eigen::Quaterniond(normal(rng), normal(rng), normal(rng), normal(rng));
    n2 = quat.squaredNorm();
  } while (n2 < 1e-20);
  quat.normalize();
  return RotationMatrix::from_matrix(quat.toRotationMatrix());
}

RotationMatrix random_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_rotation(rng);
}

std::vector<Vec3> rotate_points(const RotationMatrix& q,
                                std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(q * p);
  return out;
}

}  // namespace rotalith
