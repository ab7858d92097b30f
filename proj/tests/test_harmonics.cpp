#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "rotalith/errors.hpp"
#include "rotalith/harmonics.hpp"

namespace rotalith {
namespace {

HarmonicCoeffs random_coeffs(int degree, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  HarmonicCoeffs c(degree, channels);
  for (double& v : c.data()) v = g(rng);
  return c;
}

TEST(ShForward, ConstantSignalHasOnlyDegreeZero) {
  const int b = 6;
  S2Signal s(b, 1);
  std::fill(s.data().begin(), s.data().end(), 2.5);
  const HarmonicCoeffs c = sh_forward(s);
  EXPECT_NEAR(c.at(0, 0, 0), 2.5 * std::sqrt(4.0 * kPi), 1e-12);
  for (int l = 1; l <= c.degree(); ++l) {
    for (int m = -l; m <= l; ++m) EXPECT_NEAR(c.at(l, m, 0), 0.0, 1e-12);
  }
}

TEST(ShForward, CosBetaIsSingleZonalCoefficient) {
  const int b = 8;
  S2Signal s(b, 1);
  for (int i = 0; i < s.side(); ++i) {
    for (int j = 0; j < s.side(); ++j) s.at(i, j, 0) = std::cos(grid_beta(b, j));
  }
  const HarmonicCoeffs c = sh_forward(s);
  for (int l = 0; l <= c.degree(); ++l) {
    for (int m = -l; m <= l; ++m) {
      const double expected = (l == 1 && m == 0) ? std::sqrt(4.0 * kPi / 3.0) : 0.0;
      EXPECT_NEAR(c.at(l, m, 0), expected, 1e-12) << l << "," << m;
    }
  }
}

TEST(ShForward, BandLimitedRoundTrip) {
  for (int b : {2, 4, 8, 16}) {
    const HarmonicCoeffs c = random_coeffs(b - 1, 3, 10 + b);
    const S2Signal s = sh_inverse(c, b);
    const S2Signal r = sh_inverse(sh_forward(s), b);
    EXPECT_LE(max_abs_diff(r, s), 1e-8) << "B " << b;
    const HarmonicCoeffs back = sh_forward(s);
    for (std::size_t i = 0; i < c.data().size(); ++i) EXPECT_NEAR(back.data()[i], c.data()[i], 1e-9);
  }
}

TEST(ShForward, DegreeOverflowThrows) {
  S2Signal s(4, 1);
  EXPECT_THROW(sh_forward(s, 4), ValidationError);
  EXPECT_NO_THROW(sh_forward(s, 3));
}

TEST(ShBasis, DegreeOneClosedForm) {
  // Orthonormal real degree-1 harmonics: sqrt(3/4pi) (z, x, y) for m = (0, 1, -1).
  std::mt19937_64 rng(1);
  const double k = std::sqrt(3.0 / (4.0 * kPi));
  for (int n = 0; n < 50; ++n) {
    const Vec3 d = random_rotation(rng) * Vec3(0, 0, 1);
    const std::vector<double> y = sh_basis(1, d);
    EXPECT_NEAR(y[sh_index(0, 0)], 0.5 / std::sqrt(kPi), 1e-14);
    EXPECT_NEAR(y[sh_index(1, 0)], k * d.z(), 1e-14);
    EXPECT_NEAR(y[sh_index(1, 1)], k * d.x(), 1e-14);
    EXPECT_NEAR(y[sh_index(1, -1)], k * d.y(), 1e-14);
  }
}

TEST(ShEvaluate, MatchesSynthesisOnGrid) {
  const int b = 5;
  const HarmonicCoeffs c = random_coeffs(b - 1, 2, 7);
  const S2Signal s = sh_inverse(c, b);
  for (int i = 0; i < s.side(); i += 3) {
    for (int j = 0; j < s.side(); j += 2) {
      const auto v = sh_evaluate(c, direction(grid_alpha(b, i), grid_beta(b, j)));
      for (int ch = 0; ch < 2; ++ch) EXPECT_NEAR(v[ch], s.at(i, j, ch), 1e-12);
    }
  }
}

TEST(BetaWeights, Totals) {
  for (int b : {2, 4, 8, 16, 32}) {
    for (QuadratureRule r : {QuadratureRule::driscoll_healy, QuadratureRule::riemann_sin}) {
      const std::vector<double> w = beta_weights(b, r);
      ASSERT_EQ(w.size(), static_cast<std::size_t>(2 * b));
      // Midpoint rule: sum = (pi / 2B) / sin(pi / 4B).
      const double tol = r == QuadratureRule::driscoll_healy ? 1e-13 : std::pow(kPi / (4 * b), 2) / 2;
      EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 2.0, tol);
    }
  }
}

TEST(BetaWeights, DriscollHealyIntegratesPolynomialsExactly) {
  // Exact for cos^p(beta) sin(beta) up to p < 2B.
  const int b = 8;
  const std::vector<double> w = beta_weights(b, QuadratureRule::driscoll_healy);
  for (int p = 0; p < 2 * b; ++p) {
    double q = 0.0;
    for (int j = 0; j < 2 * b; ++j) q += w[j] * std::pow(std::cos(grid_beta(b, j)), p);
    const double exact = (p % 2 == 0) ? 2.0 / (p + 1) : 0.0;
    EXPECT_NEAR(q, exact, 1e-13) << "p " << p;
  }
}

}  // namespace
}  // namespace rotalith
