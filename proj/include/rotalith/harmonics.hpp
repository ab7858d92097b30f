#pragma once

#include <span>
#include <vector>

#include "rotalith/geometry.hpp"
#include "rotalith/grid.hpp"

namespace rotalith {

// Real orthonormal spherical harmonics without the Condon-Shortley phase:
//   Y_l0  = N_l0 P_l(cos b)
//   Y_lm  = sqrt(2) N_lm P_l^m(cos b) cos(m a)   (m > 0)
//   Y_l-m = sqrt(2) N_lm P_l^m(cos b) sin(m a)   (m > 0)
// Coefficients of degree l and order m live at index l*l + l + m.

inline int sh_index(int l, int m) { return l * l + l + m; }
inline int sh_count(int degree) { return (degree + 1) * (degree + 1); }

/// Harmonic coefficients up to `degree`, laid out [(degree+1)^2][channels].
class HarmonicCoeffs {
 public:
  HarmonicCoeffs() = default;
  HarmonicCoeffs(int degree, int channels);

  int degree() const { return degree_; }
  int channels() const { return channels_; }

  double& at(int l, int m, int c) { return data_[sh_index(l, m) * channels_ + c]; }
  double at(int l, int m, int c) const { return data_[sh_index(l, m) * channels_ + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int degree_ = -1;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Normalized associated Legendre values N_lm P_l^m(cos beta) for
/// 0 <= m <= l <= degree, written at index sh_index(l, m).
void normalized_legendre(int degree, double beta, std::span<double> out);

/// All real harmonics of degree <= `degree` at direction (alpha, beta).
void sh_basis(int degree, double alpha, double beta, std::span<double> out);
std::vector<double> sh_basis(int degree, const Vec3& dir);

/// Weights for integrating over beta on the offset grid. The Driscoll-Healy
/// weights sum to 2 (the integral of sin(beta) over [0, pi]); the midpoint
/// sum approaches 2 as B grows.
enum class QuadratureRule {
  driscoll_healy,  ///< exact for band-limits below 2B
  riemann_sin,     ///< sin(beta_j) * pi / 2B midpoint sum
};
std::vector<double> beta_weights(int bandwidth, QuadratureRule rule);

/// Analysis on the equal-angle grid. Requires degree < bandwidth.
HarmonicCoeffs sh_forward(const S2Signal& s, int degree);
HarmonicCoeffs sh_forward(const S2Signal& s);  // degree = B - 1

/// Synthesis on the equal-angle grid of the given bandwidth.
S2Signal sh_inverse(const HarmonicCoeffs& coeffs, int bandwidth);

/// Evaluates the expansion at an arbitrary direction, one value per channel.
std::vector<double> sh_evaluate(const HarmonicCoeffs& coeffs, const Vec3& dir);

}  // namespace rotalith
