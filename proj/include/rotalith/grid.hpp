#pragma once

#include <cstddef>
#include <vector>

#include "rotalith/geometry.hpp"

namespace rotalith {

// Equal-angle sampling shared by every dense signal. With n = 2B samples
// per axis:
//   alpha_i = pi i / B
//   beta_j  = pi (2j + 1) / (4B)
//   h_k     = k / (2B)        (gamma_k = 2 pi h_k on the rotation group)
inline double grid_alpha(int bandwidth, int i) { return kPi * i / bandwidth; }
inline double grid_beta(int bandwidth, int j) {
  return kPi * (2 * j + 1) / (4.0 * bandwidth);
}
inline double grid_h(int bandwidth, int k) { return k / (2.0 * bandwidth); }
inline double grid_gamma(int bandwidth, int k) { return kPi * k / bandwidth; }

/// Dense C-channel signal on S^2 x H, laid out [2B][2B][2B][C] as
/// (alpha, beta, h, channel).
class SphericalGrid {
 public:
  SphericalGrid() = default;
  SphericalGrid(int bandwidth, int channels);

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

/// Dense C-channel signal on S^2, laid out [2B][2B][C] as (alpha, beta, c).
class S2Signal {
 public:
  S2Signal() = default;
  S2Signal(int bandwidth, int channels);

  int bandwidth() const { return bandwidth_; }
  int channels() const { return channels_; }
  int side() const { return 2 * bandwidth_; }

  double& at(int i, int j, int c) { return data_[index(i, j, c)]; }
  double at(int i, int j, int c) const { return data_[index(i, j, c)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::size_t index(int i, int j, int c) const {
    return (static_cast<std::size_t>(i) * side() + j) * channels_ + c;
  }

 private:
  int bandwidth_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Largest absolute entry-wise difference; throws on shape mismatch.
double max_abs_diff(const SphericalGrid& a, const SphericalGrid& b);
double max_abs_diff(const S2Signal& a, const S2Signal& b);

}  // namespace rotalith
