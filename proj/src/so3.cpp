#include "rotalith/so3.hpp"

#include <algorithm>
#include <cmath>

#include "rotalith/errors.hpp"
#include "rotalith/parallel.hpp"
#include "rotalith/voxelizer.hpp"

namespace rotalith {

namespace {

constexpr double kHConstancyTol = 1e-10;

void require_same_bandwidth(int a, int b, const char* what) {
  if (a != b) {
    throw ValidationError(std::string("bandwidth mismatch in ") + what + ": " +
                          std::to_string(a) + " vs " + std::to_string(b));
  }
}

// Haar weight of every Euler grid node in beta row j; sums to 1 over the grid.
std::vector<double> haar_row_weights(int bandwidth, QuadratureRule rule) {
  std::vector<double> w = beta_weights(bandwidth, rule);
  double total = 0.0;
  for (double x : w) total += x;
  const double n = 2.0 * bandwidth;
  for (double& x : w) x /= total * n * n;
  return w;
}

}  // namespace

SO3Signal::SO3Signal(int bandwidth, int channels)
    : bandwidth_(bandwidth), channels_(channels) {
  if (bandwidth < 1 || channels < 1) throw ValidationError("invalid SO(3) signal shape");
  const std::size_t n = static_cast<std::size_t>(side());
  data_.assign(n * n * n * channels, 0.0);
}

SO3Signal adjoint(const SphericalGrid& f) {
  SO3Signal s(f.bandwidth(), f.channels());
  // gamma_k = 2 pi h_k, so T^-1 of the Euler node (i, j, k) is voxel (i, j, k).
  s.data() = f.data();
  return s;
}

SphericalGrid adjoint_inverse(const SO3Signal& s) {
  SphericalGrid f(s.bandwidth(), s.channels());
  f.data() = s.data();
  return f;
}

S2Signal gamma_average(const SO3Signal& s) {
  S2Signal g(s.bandwidth(), s.channels());
  const int n = s.side();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < s.channels(); ++c) {
        double sum = 0.0;
        for (int k = 0; k < n; ++k) sum += s.at(i, j, k, c);
        g.at(i, j, c) = sum / n;
      }
    }
  }
  return g;
}

S2Signal shells_as_channels(const SphericalGrid& f) {
  const int n = f.side();
  const int channels = f.channels();
  S2Signal g(f.bandwidth(), n * channels);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        for (int c = 0; c < channels; ++c) g.at(i, j, k * channels + c) = f.at(i, j, k, c);
      }
    }
  }
  return g;
}

SphericalGrid lift_to_grid(const S2Signal& s) {
  SphericalGrid f(s.bandwidth(), s.channels());
  const int n = s.side();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        for (int c = 0; c < s.channels(); ++c) f.at(i, j, k, c) = s.at(i, j, c);
      }
    }
  }
  return f;
}

double max_h_variation(const SphericalGrid& g) {
  const int n = g.side();
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < g.channels(); ++c) {
        double lo = g.at(i, j, 0, c), hi = lo;
        for (int k = 1; k < n; ++k) {
          lo = std::min(lo, g.at(i, j, k, c));
          hi = std::max(hi, g.at(i, j, k, c));
        }
        worst = std::max(worst, hi - lo);
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// SphericalFilter

SphericalFilter SphericalFilter::from_grid(int bandwidth, int c_out, int c_in,
                                           std::vector<double> values) {
  if (bandwidth < 1 || c_out < 1 || c_in < 1) throw ValidationError("invalid filter shape");
  const std::size_t n = 2 * static_cast<std::size_t>(bandwidth);
  if (values.size() != n * n * c_out * c_in) {
    throw ValidationError("filter grid has " + std::to_string(values.size()) +
                          " values, expected " + std::to_string(n * n * c_out * c_in));
  }
  SphericalFilter psi;
  psi.bandwidth_ = bandwidth;
  psi.c_out_ = c_out;
  psi.c_in_ = c_in;
  psi.degree_ = -1;
  psi.values_ = std::move(values);
  return psi;
}

SphericalFilter SphericalFilter::from_coefficients(int bandwidth, int c_out, int c_in,
                                                   int degree, std::vector<double> coeffs) {
  if (bandwidth < 1 || c_out < 1 || c_in < 1 || degree < 0) {
    throw ValidationError("invalid filter shape");
  }
  if (degree >= bandwidth) {
    throw ValidationError("filter degree " + std::to_string(degree) +
                          " must be below the bandwidth " + std::to_string(bandwidth));
  }
  const std::size_t expected = static_cast<std::size_t>(c_out) * c_in * sh_count(degree);
  if (coeffs.size() != expected) {
    throw ValidationError("filter has " + std::to_string(coeffs.size()) +
                          " coefficients, expected " + std::to_string(expected));
  }
  SphericalFilter psi;
  psi.bandwidth_ = bandwidth;
  psi.c_out_ = c_out;
  psi.c_in_ = c_in;
  psi.degree_ = degree;
  psi.values_ = std::move(coeffs);
  return psi;
}

SphericalFilter SphericalFilter::constant(int bandwidth, int c_out, int c_in, double value) {
  // Y_00 = 1 / sqrt(4 pi)
  std::vector<double> coeffs(static_cast<std::size_t>(c_out) * c_in,
                             value * std::sqrt(4.0 * kPi));
  return from_coefficients(bandwidth, c_out, c_in, 0, std::move(coeffs));
}

SphericalFilter SphericalFilter::to_spectral(int degree) const {
  const int pairs = c_out_ * c_in_;
  if (is_spectral()) {
    // Truncate or zero-pad.
    std::vector<double> out(static_cast<std::size_t>(pairs) * sh_count(degree), 0.0);
    const int keep = std::min(degree, degree_);
    for (int p = 0; p < pairs; ++p) {
      for (int idx = 0; idx < sh_count(keep); ++idx) {
        out[static_cast<std::size_t>(p) * sh_count(degree) + idx] =
            values_[static_cast<std::size_t>(p) * sh_count(degree_) + idx];
      }
    }
    return from_coefficients(bandwidth_, c_out_, c_in_, degree, std::move(out));
  }
  S2Signal grid(bandwidth_, pairs);
  grid.data() = values_;
  const HarmonicCoeffs h = sh_forward(grid, degree);
  std::vector<double> out(static_cast<std::size_t>(pairs) * sh_count(degree));
  for (int p = 0; p < pairs; ++p) {
    for (int idx = 0; idx < sh_count(degree); ++idx) {
      out[static_cast<std::size_t>(p) * sh_count(degree) + idx] = h.data()[idx * pairs + p];
    }
  }
  return from_coefficients(bandwidth_, c_out_, c_in_, degree, std::move(out));
}

SphericalFilter SphericalFilter::to_grid() const {
  if (!is_spectral()) return *this;
  const int pairs = c_out_ * c_in_;
  HarmonicCoeffs h(degree_, pairs);
  for (int p = 0; p < pairs; ++p) {
    for (int idx = 0; idx < sh_count(degree_); ++idx) {
      h.data()[idx * pairs + p] = values_[static_cast<std::size_t>(p) * sh_count(degree_) + idx];
    }
  }
  S2Signal grid = sh_inverse(h, bandwidth_);
  return from_grid(bandwidth_, c_out_, c_in_, std::move(grid.data()));
}

std::vector<double> SphericalFilter::eval(const Vec3& dir) const {
  const int pairs = c_out_ * c_in_;
  std::vector<double> out(pairs, 0.0);
  if (is_spectral()) {
    const std::vector<double> basis = sh_basis(degree_, dir);
    const int count = sh_count(degree_);
    for (int p = 0; p < pairs; ++p) {
      const double* coeff = values_.data() + static_cast<std::size_t>(p) * count;
      double sum = 0.0;
      for (int idx = 0; idx < count; ++idx) sum += coeff[idx] * basis[idx];
      out[p] = sum;
    }
    return out;
  }

  const SphericalPoint s = cart_to_spherical(dir.normalized());
  const int n = 2 * bandwidth_;
  const double ua = s.alpha * bandwidth_ / kPi;
  const double ub = std::clamp(s.beta * n / kPi - 0.5, 0.0, n - 1.0);
  const int i0 = static_cast<int>(std::floor(ua)) % n;
  const int i1 = (i0 + 1) % n;
  const double ta = ua - std::floor(ua);
  const int j0 = std::min(static_cast<int>(std::floor(ub)), n - 2);
  const int j1 = j0 + 1;
  const double tb = ub - j0;
  auto at = [&](int i, int j, int p) {
    return values_[(static_cast<std::size_t>(i) * n + j) * pairs + p];
  };
  for (int p = 0; p < pairs; ++p) {
    out[p] = (1 - ta) * (1 - tb) * at(i0, j0, p) + ta * (1 - tb) * at(i1, j0, p) +
             (1 - ta) * tb * at(i0, j1, p) + ta * tb * at(i1, j1, p);
  }
  return out;
}

std::vector<double> filter_eval(const SphericalFilter& psi, const RotationMatrix& r) {
  return psi.eval(r.matrix().col(2));
}

// ---------------------------------------------------------------------------
// Correlation

namespace {

struct EulerGrid {
  std::vector<RotationMatrix> inverse;  // R^-1 per node, (i, j, k) order
  std::vector<double> row_weight;       // Haar weight by beta row j
};

EulerGrid make_euler_grid(int bandwidth, QuadratureRule rule) {
  const int n = 2 * bandwidth;
  EulerGrid grid;
  grid.row_weight = haar_row_weights(bandwidth, rule);
  grid.inverse.reserve(static_cast<std::size_t>(n) * n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        grid.inverse.push_back(
            euler_to_matrix({grid_alpha(bandwidth, i), grid_beta(bandwidth, j),
                             grid_gamma(bandwidth, k)})
                .inverse());
      }
    }
  }
  return grid;
}

void check_correlation_inputs(const S2Signal& g, const SphericalFilter& psi) {
  require_same_bandwidth(g.bandwidth(), psi.bandwidth(), "correlation");
  if (g.channels() != psi.c_in()) {
    throw ValidationError("signal has " + std::to_string(g.channels()) +
                          " channels but the filter expects " + std::to_string(psi.c_in()));
  }
}

std::vector<double> correlate_at(const S2Signal& g, const SphericalFilter& psi,
                                 const EulerGrid& grid, const RotationMatrix& tp) {
  const int n = g.side();
  const int c_in = psi.c_in();
  const int c_out = psi.c_out();
  std::vector<double> out(c_out, 0.0);
  std::size_t node = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double w = grid.row_weight[j];
      const double* gv = &g.data()[g.index(i, j, 0)];
      for (int k = 0; k < n; ++k, ++node) {
        const std::vector<double> value = filter_eval(psi, grid.inverse[node] * tp);
        for (int co = 0; co < c_out; ++co) {
          double acc = 0.0;
          for (int ci = 0; ci < c_in; ++ci) acc += value[co * c_in + ci] * gv[ci];
          out[co] += w * acc;
        }
      }
    }
  }
  return out;
}

}  // namespace

std::vector<double> correlate_bruteforce_at(const S2Signal& g, const SphericalFilter& psi,
                                            const RotationMatrix& tp, QuadratureRule rule) {
  check_correlation_inputs(g, psi);
  return correlate_at(g, psi, make_euler_grid(g.bandwidth(), rule), tp);
}

S2Signal correlate_bruteforce(const S2Signal& g, const SphericalFilter& psi,
                              QuadratureRule rule) {
  check_correlation_inputs(g, psi);
  const int bandwidth = g.bandwidth();
  const int n = g.side();
  const EulerGrid grid = make_euler_grid(bandwidth, rule);
  S2Signal out(bandwidth, psi.c_out());
  parallel_for(static_cast<std::size_t>(n) * n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t cell = begin; cell < end; ++cell) {
      const int i = static_cast<int>(cell) / n;
      const int j = static_cast<int>(cell) % n;
      const RotationMatrix tp =
          tmap({grid_alpha(bandwidth, i), grid_beta(bandwidth, j), 0.0});
      const std::vector<double> v = correlate_at(g, psi, grid, tp);
      for (int c = 0; c < psi.c_out(); ++c) out.at(i, j, c) = v[c];
    }
  });
  return out;
}

HarmonicCoeffs correlate_spectral_coefficients(const S2Signal& g, const SphericalFilter& psi_in) {
  check_correlation_inputs(g, psi_in);
  const SphericalFilter psi =
      psi_in.is_spectral() ? psi_in : psi_in.to_spectral(g.bandwidth() - 1);
  if (psi.degree() >= g.bandwidth()) {
    throw ValidationError("filter degree " + std::to_string(psi.degree()) +
                          " overflows bandwidth " + std::to_string(g.bandwidth()));
  }
  const int degree = psi.degree();
  const HarmonicCoeffs gh = sh_forward(g, degree);
  HarmonicCoeffs out(degree, psi.c_out());
  for (int l = 0; l <= degree; ++l) {
    const double scale = 1.0 / std::sqrt(4.0 * kPi * (2 * l + 1));
    for (int co = 0; co < psi.c_out(); ++co) {
      for (int ci = 0; ci < psi.c_in(); ++ci) {
        // Only the zonal part of psi survives the average over gamma.
        const double k = psi.coefficient(co, ci, l, 0) * scale;
        if (k == 0.0) continue;
        for (int m = -l; m <= l; ++m) out.at(l, m, co) += k * gh.at(l, m, ci);
      }
    }
  }
  return out;
}

S2Signal correlate_spectral(const S2Signal& g, const SphericalFilter& psi) {
  return sh_inverse(correlate_spectral_coefficients(g, psi), g.bandwidth());
}

SphericalGrid svc_bruteforce(const SphericalGrid& f, const SphericalFilter& psi,
                             QuadratureRule rule) {
  require_same_bandwidth(f.bandwidth(), psi.bandwidth(), "svc");
  const S2Signal g = gamma_average(adjoint(f));
  const S2Signal out = correlate_bruteforce(g, psi, rule);

  // The output cannot depend on h: psi_T(R^-1 T(p)) only sees T(p) n.
  // Re-evaluate the outermost shell for one alpha per beta row.
  const int bandwidth = f.bandwidth();
  const EulerGrid grid = make_euler_grid(bandwidth, rule);
  const double h_last = grid_h(bandwidth, f.side() - 1);
  for (int j = 0; j < f.side(); ++j) {
    const RotationMatrix tp = tmap({grid_alpha(bandwidth, 0), grid_beta(bandwidth, j), h_last});
    const std::vector<double> v = correlate_at(g, psi, grid, tp);
    for (int c = 0; c < psi.c_out(); ++c) {
      if (std::abs(v[c] - out.at(0, j, c)) > kHConstancyTol) {
        throw NumericError("spherical voxel convolution output varies along h");
      }
    }
  }
  return lift_to_grid(out);
}

SphericalGrid svc_spectral(const SphericalGrid& f, const SphericalFilter& psi) {
  require_same_bandwidth(f.bandwidth(), psi.bandwidth(), "svc");
  SphericalGrid out = lift_to_grid(correlate_spectral(gamma_average(adjoint(f)), psi));
  if (max_h_variation(out) > kHConstancyTol) {
    throw NumericError("spherical voxel convolution output varies along h");
  }
  return out;
}

SphericalGrid svc(const SphericalGrid& f, const SphericalFilter& psi, SvcImpl impl) {
  return impl == SvcImpl::bruteforce ? svc_bruteforce(f, psi) : svc_spectral(f, psi);
}

// ---------------------------------------------------------------------------
// Equivariance

SphericalGrid rotate_bandlimited(const SphericalGrid& f, const RotationMatrix& q) {
  const int bandwidth = f.bandwidth();
  const int n = f.side();
  const int channels = f.channels();
  const HarmonicCoeffs coeffs = sh_forward(shells_as_channels(f));
  const int count = sh_count(coeffs.degree());
  const int stacked = coeffs.channels();
  const RotationMatrix qinv = q.inverse();

  SphericalGrid out(bandwidth, channels);
  std::vector<double> basis(count);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec3 src = qinv * direction(grid_alpha(bandwidth, i), grid_beta(bandwidth, j));
      const SphericalPoint s = cart_to_spherical(src.normalized());
      sh_basis(coeffs.degree(), s.alpha, s.beta, basis);
      for (int ch = 0; ch < stacked; ++ch) {
        double v = 0.0;
        for (int idx = 0; idx < count; ++idx) v += basis[idx] * coeffs.data()[idx * stacked + ch];
        out.at(i, j, ch / channels, ch % channels) = v;
      }
    }
  }
  return out;
}

EquivarianceReport equivariance_report(const SphericalGrid& f, const SphericalFilter& psi,
                                       const RotationMatrix& q) {
  require_same_bandwidth(f.bandwidth(), psi.bandwidth(), "equivariance report");
  const int bandwidth = f.bandwidth();
  const HarmonicCoeffs base = correlate_spectral_coefficients(
      gamma_average(adjoint(rotate_bandlimited(f, RotationMatrix()))), psi);
  const HarmonicCoeffs rotated =
      correlate_spectral_coefficients(gamma_average(adjoint(rotate_bandlimited(f, q))), psi);

  EquivarianceReport report;
  double sum = 0.0;
  std::size_t count = 0;
  for (int i = 0; i < f.side(); ++i) {
    for (int j = 0; j < f.side(); ++j) {
      const Vec3 u = direction(grid_alpha(bandwidth, i), grid_beta(bandwidth, j));
      const std::vector<double> a = sh_evaluate(rotated, q * u);
      const std::vector<double> b = sh_evaluate(base, u);
      for (std::size_t c = 0; c < a.size(); ++c) {
        const double e = std::abs(a[c] - b[c]);
        report.max_abs_err = std::max(report.max_abs_err, e);
        sum += e;
        ++count;
      }
    }
  }
  report.mean_abs_err = count ? sum / count : 0.0;
  return report;
}

EquivarianceReport grid_equivariance_report(const SphericalGrid& f, const SphericalFilter& psi,
                                            int m, SvcImpl impl) {
  const SphericalGrid expected = grid_shift_alpha(svc(f, psi, impl), m);
  const SphericalGrid actual = svc(grid_shift_alpha(f, m), psi, impl);
  EquivarianceReport report;
  double sum = 0.0;
  for (std::size_t idx = 0; idx < actual.data().size(); ++idx) {
    const double e = std::abs(actual.data()[idx] - expected.data()[idx]);
    report.max_abs_err = std::max(report.max_abs_err, e);
    sum += e;
  }
  report.mean_abs_err = actual.data().empty() ? 0.0 : sum / actual.data().size();
  return report;
}

}  // namespace rotalith
