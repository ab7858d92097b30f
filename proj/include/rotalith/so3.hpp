#pragma once

#include <vector>

#include "rotalith/geometry.hpp"
#include "rotalith/grid.hpp"
#include "rotalith/harmonics.hpp"

namespace rotalith {

/// Signal on the ZYZ Euler grid of SO(3), laid out [2B][2B][2B][C] as
/// (alpha_i, beta_j, gamma_k, channel) with gamma_k = 2 pi k / 2B.
class SO3Signal {
 public:
  SO3Signal() = default;
  SO3Signal(int bandwidth, int channels);

  int bandwidth() const { return bandwidth_; }
  int channels() const { return channels_; }
  int side() const { return 2 * bandwidth_; }

  double& at(int i, int j, int k, int c) { return data_[index(i, j, k, c)]; }
  double at(int i, int j, int k, int c) const { return data_[index(i, j, k, c)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::size_t index(int i, int j, int k, int c) const {
    const std::size_t n = static_cast<std::size_t>(side());
    return ((static_cast<std::size_t>(i) * n + j) * n + k) * channels_ + c;
  }

 private:
  int bandwidth_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// f_T(alpha, beta, gamma) = f(alpha, beta, gamma / 2pi). With the shared
/// grid convention this keeps every index in place.
SO3Signal adjoint(const SphericalGrid& f);
SphericalGrid adjoint_inverse(const SO3Signal& s);

/// g(i, j, c) = (1 / 2B) sum_k s(i, j, k, c).
S2Signal gamma_average(const SO3Signal& s);

/// Re-reads the 2B radial shells of a grid as S^2 channels (channel index
/// k * C + c). Used by the optional mode that keeps radial structure.
S2Signal shells_as_channels(const SphericalGrid& f);

/// Repeats an S^2 signal along the h axis.
SphericalGrid lift_to_grid(const S2Signal& s);

/// Largest variation of any (i, j, c) column along the h axis.
double max_h_variation(const SphericalGrid& g);

/// Rotation-group filter constant along gamma, stored as a function on S^2:
/// psi_T(Z(a) Y(b) Z(g)) = psi(a, b). Holds C_out x C_in channel pairs,
/// either as samples on the (alpha, beta) grid or as real harmonic
/// coefficients up to degree L < B.
class SphericalFilter {
 public:
  SphericalFilter() = default;

  /// values laid out [2B][2B][c_out][c_in].
  static SphericalFilter from_grid(int bandwidth, int c_out, int c_in,
                                   std::vector<double> values);
  /// coeffs laid out [c_out][c_in][(degree+1)^2].
  static SphericalFilter from_coefficients(int bandwidth, int c_out, int c_in,
                                           int degree, std::vector<double> coeffs);
  /// psi == value for every channel pair.
  static SphericalFilter constant(int bandwidth, int c_out, int c_in, double value);

  bool is_spectral() const { return degree_ >= 0; }
  int bandwidth() const { return bandwidth_; }
  int c_out() const { return c_out_; }
  int c_in() const { return c_in_; }
  int degree() const { return degree_; }
  const std::vector<double>& values() const { return values_; }

  double coefficient(int co, int ci, int l, int m) const {
    return values_[(static_cast<std::size_t>(co) * c_in_ + ci) * sh_count(degree_) + sh_index(l, m)];
  }

  SphericalFilter to_spectral(int degree) const;
  SphericalFilter to_grid() const;

  /// psi at a direction on S^2, [c_out * c_in] row-major. Grid filters use
  /// bilinear interpolation (alpha wraps, beta clamps).
  std::vector<double> eval(const Vec3& dir) const;

 private:
  int bandwidth_ = 0;
  int c_out_ = 0;
  int c_in_ = 0;
  int degree_ = -1;  // -1: grid form
  std::vector<double> values_;
};

/// psi_T(R) = psi(R n), n the north pole.
std::vector<double> filter_eval(const SphericalFilter& psi, const RotationMatrix& r);

enum class SvcImpl { bruteforce, spectral };

// Correlation of an S^2 signal g (read as a function of R through R n) with
// a gamma-constant filter, under the Haar probability measure:
//   out(u) = sum_R w(R) psi_T(R^-1 T(u)) g(R n)
// The result depends on the output direction u only.

/// Literal quadrature over the full 2B x 2B x 2B Euler grid.
S2Signal correlate_bruteforce(const S2Signal& g, const SphericalFilter& psi,
                              QuadratureRule rule = QuadratureRule::driscoll_healy);
/// The same correlation evaluated at one direction.
std::vector<double> correlate_bruteforce_at(const S2Signal& g, const SphericalFilter& psi,
                                            const RotationMatrix& tp,
                                            QuadratureRule rule = QuadratureRule::driscoll_healy);

/// Per-degree spectral product: out_lm = sum_ci psi_l0 g_lm / sqrt(4 pi (2l+1)).
HarmonicCoeffs correlate_spectral_coefficients(const S2Signal& g, const SphericalFilter& psi);
S2Signal correlate_spectral(const S2Signal& g, const SphericalFilter& psi);

/// Spherical voxel convolution of a C_in grid: adjoint, gamma average,
/// correlation, then lift back to S^2 x H. The output is constant along h;
/// both routes verify this and throw NumericError otherwise.
SphericalGrid svc_bruteforce(const SphericalGrid& f, const SphericalFilter& psi,
                             QuadratureRule rule = QuadratureRule::driscoll_healy);
SphericalGrid svc_spectral(const SphericalGrid& f, const SphericalFilter& psi);
SphericalGrid svc(const SphericalGrid& f, const SphericalFilter& psi, SvcImpl impl);

/// Projects every shell/channel of f onto degrees < B and samples the
/// projection rotated by q: [L_q f](x) = f(q^-1 x). Exact for band-limited f.
SphericalGrid rotate_bandlimited(const SphericalGrid& f, const RotationMatrix& q);

struct EquivarianceReport {
  double max_abs_err = 0.0;
  double mean_abs_err = 0.0;
};

/// Compares [psi * L_q f](q p) with [psi * f](p) over every grid point p,
/// both sides evaluated exactly from the spectral output. The bandwidth is
/// that of f.
EquivarianceReport equivariance_report(const SphericalGrid& f, const SphericalFilter& psi,
                                       const RotationMatrix& q);

/// Same comparison for the grid rotation Z(2 pi m / 2B), which maps grid
/// points onto grid points; uses the chosen implementation directly.
EquivarianceReport grid_equivariance_report(const SphericalGrid& f, const SphericalFilter& psi,
                                            int m, SvcImpl impl);

}  // namespace rotalith
