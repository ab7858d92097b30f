#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rotalith/io.hpp"
#include "rotalith/so3.hpp"
#include "rotalith/sprin.hpp"
#include "rotalith/voxelizer.hpp"

namespace rotalith {

/// Fully connected layer, y = W x + b.
struct DenseLayer {
  Eigen::MatrixXd weight;  // [out x in]
  Eigen::VectorXd bias;
};

/// Scaled-normal weights (variance 2 / fan_in), zero bias.
DenseLayer random_dense(int in, int out, Rng& rng);

/// Applies the layers to every row; rectifier after each layer.
Eigen::MatrixXd apply_dense(const Eigen::MatrixXd& rows, const std::vector<DenseLayer>& layers);

// ---------------------------------------------------------------------------
// Dense pipeline: voxelize, spherical convolutions, trilinear read-out.

struct PrinConfig {
  int bandwidth = 8;
  double xi = 1.0 / 32.0;  ///< voxelization window half-width
  SamplingMode mode = SamplingMode::daas;
  int svc_channels = 40;                    ///< output of the first layer
  std::vector<int> group_channels{40, 50};  ///< further S^2 correlation layers
  std::vector<int> fc_widths{50, 50};       ///< per-point and global heads
  /// Feed the 2B radial shells as separate input channels instead of
  /// averaging them away.
  bool shells_as_channels = false;
  SvcImpl impl = SvcImpl::spectral;

  SamplingConfig sampling() const { return {xi, mode}; }
  /// Channel count entering the first convolution.
  int input_channels() const { return shells_as_channels ? 2 * bandwidth : 1; }
  void validate() const;
};

struct PrinWeights {
  std::vector<SphericalFilter> filters;  ///< one per convolution layer
  std::vector<DenseLayer> point_fc;
  std::vector<DenseLayer> global_fc;
};

struct ForwardResult {
  FeatureMatrix per_point;  ///< one row per input point (may be empty)
  Eigen::VectorXd global;
};

/// Filters get spectral coefficients up to degree B - 1.
PrinWeights init_prin_weights(const PrinConfig& cfg, std::uint64_t seed);

/// Voxel features after the convolution stack, constant along h.
SphericalGrid prin_voxel_features(std::span<const Vec3> points, const PrinWeights& weights,
                                  const PrinConfig& cfg);
/// Points must lie in the unit ball.
ForwardResult prin_forward(std::span<const Vec3> points, const PrinWeights& weights,
                           const PrinConfig& cfg);

// ---------------------------------------------------------------------------
// Sparse pipeline.

struct SprinStage {
  /// 0 keeps every point of the previous level; otherwise FPS to this many.
  std::size_t centers = 0;
  std::vector<SprinLayerCfg> layers;
};

struct SprinConfig {
  std::vector<SprinStage> encoder{
      {0, {{64, 2}, {64, 2}}},
      {128, {{72, 3}, {32, 1}, {32, 1}}},
      {32, {{32, 1}, {32, 1}, {32, 1}}},
  };
  /// Runs deepest first: decoder[s] lifts encoder level L - s back to level
  /// L - s - 1 with a propagation layer, then correlations over the finer
  /// level whose first one also sees that level's encoder features.
  std::vector<std::vector<SprinLayerCfg>> decoder{
      {{16, 1}, {32, 1}},
      {{32, 1}, {48, 2}, {96, 3}},
  };
  int channels = 64;                 ///< output width of every sparse layer
  std::vector<int> filter_hidden{64};
  std::vector<int> global_fc{256, 64};
  std::vector<int> point_fc{128, 256};
  Aggregation aggregation = Aggregation::mean;

  /// Every layer with dilation 1, for exactness checks.
  SprinConfig without_dilation() const;
  void validate() const;
};

struct SprinWeights {
  std::vector<std::vector<MlpFilter>> encoder;
  std::vector<std::vector<MlpFilter>> decoder;
  std::vector<DenseLayer> global_fc;
  std::vector<DenseLayer> point_fc;
};

SprinWeights init_sprin_weights(const SprinConfig& cfg, std::uint64_t seed);

/// `seed` drives the dilated neighbor draws. With per_point false the
/// decoder is skipped and per_point stays empty. Neighborhood sizes and
/// sample counts are capped at the size of small clouds.
ForwardResult sprin_forward(std::span<const Vec3> points, const SprinWeights& weights,
                            const SprinConfig& cfg, std::uint64_t seed, bool per_point = true);

/// Feature deviation between two runs, |a - b|_F / |b|_F (0 when both vanish).
double relative_deviation(const FeatureMatrix& a, const FeatureMatrix& b);

// ---------------------------------------------------------------------------
// Descriptors and weight files.

struct Descriptor {
  FeatureMatrix features;
  std::string shape_id;
  std::vector<std::size_t> indices;
  std::uint64_t config_hash = 0;
};

std::uint64_t config_hash(const PrinConfig& cfg);
std::uint64_t config_hash(const SprinConfig& cfg);

/// The archive carries the configuration next to the weights.
TensorArchive prin_to_archive(const PrinConfig& cfg, const PrinWeights& weights);
std::pair<PrinConfig, PrinWeights> prin_from_archive(const TensorArchive& archive);
TensorArchive sprin_to_archive(const SprinConfig& cfg, const SprinWeights& weights);
std::pair<SprinConfig, SprinWeights> sprin_from_archive(const TensorArchive& archive);

TensorArchive descriptor_to_archive(const Descriptor& d);
Descriptor descriptor_from_archive(const TensorArchive& archive);

}  // namespace rotalith
