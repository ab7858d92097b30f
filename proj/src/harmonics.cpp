#include "rotalith/harmonics.hpp"

#include <cmath>
#include <complex>
#include <mutex>

#include <fftw3.h>

#include "rotalith/errors.hpp"

namespace rotalith {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Length-n real <-> half-complex transform pair with owned buffers.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    real_ = fftw_alloc_real(n);
    spec_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(backward_);
    }
    fftw_free(real_);
    fftw_free(spec_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* real() { return real_; }
  std::complex<double>* spectrum() { return reinterpret_cast<std::complex<double>*>(spec_); }
  // spectrum[m] = sum_i real[i] exp(-2 pi i m i / n)
  void forward() { fftw_execute(forward_); }
  // real[i] = sum over the full Hermitian spectrum, unnormalized
  void backward() { fftw_execute(backward_); }
  int size() const { return n_; }

 private:
  int n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace

HarmonicCoeffs::HarmonicCoeffs(int degree, int channels)
    : degree_(degree), channels_(channels) {
  if (degree < 0 || channels < 1) throw ValidationError("invalid harmonic coefficient shape");
  data_.assign(static_cast<std::size_t>(sh_count(degree)) * channels, 0.0);
}

void normalized_legendre(int degree, double beta, std::span<double> out) {
  const double x = std::cos(beta);
  const double s = std::sin(beta);
  double pmm = std::sqrt(1.0 / (4.0 * kPi));
  for (int m = 0; m <= degree; ++m) {
    if (m > 0) pmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
    out[sh_index(m, m)] = pmm;
    if (m == degree) break;
    double prev2 = pmm;
    double prev1 = std::sqrt(2.0 * m + 3.0) * x * pmm;
    out[sh_index(m + 1, m)] = prev1;
    for (int l = m + 2; l <= degree; ++l) {
      const double l2 = static_cast<double>(l) * l;
      const double m2 = static_cast<double>(m) * m;
      const double a = std::sqrt((4.0 * l2 - 1.0) / (l2 - m2));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - m2) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      const double cur = a * (x * prev1 - b * prev2);
      out[sh_index(l, m)] = cur;
      prev2 = prev1;
      prev1 = cur;
    }
  }
}

void sh_basis(int degree, double alpha, double beta, std::span<double> out) {
  normalized_legendre(degree, beta, out);
  for (int m = 1; m <= degree; ++m) {
    const double c = kSqrt2 * std::cos(m * alpha);
    const double s = kSqrt2 * std::sin(m * alpha);
    for (int l = m; l <= degree; ++l) {
      const double p = out[sh_index(l, m)];
      out[sh_index(l, m)] = p * c;
      out[sh_index(l, -m)] = p * s;
    }
  }
}

std::vector<double> sh_basis(int degree, const Vec3& dir) {
  const SphericalPoint s = cart_to_spherical(dir.normalized());
  std::vector<double> out(sh_count(degree));
  sh_basis(degree, s.alpha, s.beta, out);
  return out;
}

std::vector<double> beta_weights(int bandwidth, QuadratureRule rule) {
  const int n = 2 * bandwidth;
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) {
    const double beta = grid_beta(bandwidth, j);
    if (rule == QuadratureRule::riemann_sin) {
      w[j] = std::sin(beta) * kPi / n;
      continue;
    }
    double sum = 0.0;
    for (int k = 0; k < bandwidth; ++k) sum += std::sin((2 * k + 1) * beta) / (2 * k + 1);
    w[j] = (2.0 / bandwidth) * std::sin(beta) * sum;
  }
  return w;
}

HarmonicCoeffs sh_forward(const S2Signal& s, int degree) {
  const int bandwidth = s.bandwidth();
  if (degree < 0 || degree >= bandwidth) {
    throw ValidationError("harmonic degree " + std::to_string(degree) +
                          " must be below the bandwidth " + std::to_string(bandwidth));
  }
  const int n = s.side();
  const int channels = s.channels();
  const std::vector<double> w = beta_weights(bandwidth, QuadratureRule::driscoll_healy);
  const double dalpha = kTwoPi / n;

  HarmonicCoeffs out(degree, channels);
  RealFft fft(n);
  std::vector<double> legendre(sh_count(degree));
  for (int j = 0; j < n; ++j) {
    normalized_legendre(degree, grid_beta(bandwidth, j), legendre);
    const double wj = w[j] * dalpha;
    for (int c = 0; c < channels; ++c) {
      for (int i = 0; i < n; ++i) fft.real()[i] = s.at(i, j, c);
      fft.forward();
      const std::complex<double>* spec = fft.spectrum();
      for (int m = 0; m <= degree; ++m) {
        // sum_i s cos(m a_i) = Re X_m ; sum_i s sin(m a_i) = -Im X_m
        const double cos_sum = spec[m].real();
        const double sin_sum = -spec[m].imag();
        for (int l = m; l <= degree; ++l) {
          const double p = legendre[sh_index(l, m)] * wj;
          if (m == 0) {
            out.at(l, 0, c) += p * cos_sum;
          } else {
            out.at(l, m, c) += kSqrt2 * p * cos_sum;
            out.at(l, -m, c) += kSqrt2 * p * sin_sum;
          }
        }
      }
    }
  }
  return out;
}

HarmonicCoeffs sh_forward(const S2Signal& s) { return sh_forward(s, s.bandwidth() - 1); }

S2Signal sh_inverse(const HarmonicCoeffs& coeffs, int bandwidth) {
  const int degree = coeffs.degree();
  if (degree >= bandwidth) {
    throw ValidationError("harmonic degree " + std::to_string(degree) +
                          " does not fit bandwidth " + std::to_string(bandwidth));
  }
  const int channels = coeffs.channels();
  S2Signal out(bandwidth, channels);
  const int n = out.side();
  RealFft fft(n);
  std::vector<double> legendre(sh_count(degree));
  for (int j = 0; j < n; ++j) {
    normalized_legendre(degree, grid_beta(bandwidth, j), legendre);
    for (int c = 0; c < channels; ++c) {
      std::complex<double>* spec = fft.spectrum();
      for (int m = 0; m <= n / 2; ++m) spec[m] = 0.0;
      for (int m = 0; m <= degree; ++m) {
        double cos_part = 0.0, sin_part = 0.0;
        for (int l = m; l <= degree; ++l) {
          const double p = legendre[sh_index(l, m)];
          cos_part += p * coeffs.at(l, m, c);
          if (m > 0) sin_part += p * coeffs.at(l, -m, c);
        }
        // c2r yields X_0 + 2 Re sum_m X_m e^{i m a}; pick X_m so that this
        // equals cos_0 + sqrt2 sum_m (cos_m cos(m a) + sin_m sin(m a)).
        spec[m] = m == 0 ? std::complex<double>(cos_part, 0.0)
                         : std::complex<double>(cos_part, -sin_part) * (kSqrt2 / 2.0);
      }
      fft.backward();
      for (int i = 0; i < n; ++i) out.at(i, j, c) = fft.real()[i];
    }
  }
  return out;
}

std::vector<double> sh_evaluate(const HarmonicCoeffs& coeffs, const Vec3& dir) {
  const std::vector<double> basis = sh_basis(coeffs.degree(), dir);
  std::vector<double> out(coeffs.channels(), 0.0);
  for (int idx = 0; idx < sh_count(coeffs.degree()); ++idx) {
    for (int c = 0; c < coeffs.channels(); ++c) {
      out[c] += basis[idx] * coeffs.data()[idx * coeffs.channels() + c];
    }
  }
  return out;
}

}  // namespace rotalith
