#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rotalith/geometry.hpp"
#include "rotalith/resample.hpp"

namespace rotalith {

using Rng = std::mt19937_64;

/// The eight rotation-invariant scalars describing neighbor x_i seen from
/// center x_j in a cloud with centroid c.
struct RelativeInvariant {
  double beta_rel = 0.0;  ///< polar angle of T(x_j)^-1 x_i: angle between x_i and x_j
  double h_rel = 0.0;     ///< |x_i|
  double s1 = 0.0;        ///< |x_i - x_j|
  double s2 = 0.0;        ///< |x_i - c|
  double s3 = 0.0;        ///< |x_j - c|
  double a1 = 0.0;        ///< inner angle at x_i
  double a2 = 0.0;        ///< inner angle at x_j
  double a3 = 0.0;        ///< inner angle at c

  static constexpr int kSize = 8;
  std::array<double, kSize> to_array() const { return {beta_rel, h_rel, s1, s2, s3, a1, a2, a3}; }
};

/// Degenerate triangles (any side shorter than 1e-12) report angles
/// (0, pi/2, pi/2); a zero-length x_i or x_j gives beta_rel = 0.
RelativeInvariant relative_invariants(const Vec3& xi, const Vec3& xj, const Vec3& c);

/// Fully connected filter over [invariants | neighbor features]; rectifier
/// after every hidden layer, linear output.
class MlpFilter {
 public:
  MlpFilter() = default;
  MlpFilter(std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases);

  /// Scaled-normal weights (variance 2 / fan_in), zero biases.
  static MlpFilter random(std::span<const int> widths, Rng& rng);
  /// Zero weights and output bias `value`: evaluates to `value` everywhere.
  static MlpFilter constant(int input_dim, std::span<const int> hidden, const Eigen::VectorXd& value);

  int input_dim() const;
  int output_dim() const;
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  /// rows: one input vector per row; returns one output per row.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& rows) const;

 private:
  std::vector<Eigen::MatrixXd> weights_;  // [out x in]
  std::vector<Eigen::VectorXd> biases_;
};

enum class Aggregation { mean, max };

struct SprinLayerCfg {
  int k = 16;  ///< neighborhood size
  int d = 1;   ///< dilation: keep ceil(k / d) random neighbors out of k
  Aggregation aggregation = Aggregation::mean;
};

/// ceil(k/d) indices drawn uniformly without replacement from the k nearest
/// points to `query` (ties by lower index). With d = 1 the k nearest,
/// sorted by (distance, index). Throws if k > N or d < 1.
std::vector<std::size_t> dilated_knn(std::span<const Vec3> points, const Vec3& query, int k,
                                     int d, Rng& rng);
std::vector<std::size_t> dilated_knn(std::span<const Vec3> points, std::size_t center_idx, int k,
                                     int d, Rng& rng);

/// Greedy max-min subset of size m starting at start_idx; ties go to the
/// lower index.
std::vector<std::size_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t m,
                                                 std::size_t start_idx);

/// Index of the point farthest from the centroid (lowest index on ties).
/// Invariant under rotation and under relabeling of tie-free clouds.
std::size_t canonical_start(std::span<const Vec3> points);

Vec3 centroid(std::span<const Vec3> points);

/// Sparse correlation evaluated at arbitrary query positions, neighbors
/// drawn from `support`:
///   out(q) = mean over selected x_i of filter([invariants(x_i, q, c) | feats(x_i)])
/// `support_feats` may be empty (zero columns).
FeatureMatrix correlate_points(std::span<const Vec3> queries, std::span<const Vec3> support,
                               const FeatureMatrix& support_feats, const MlpFilter& filter,
                               const SprinLayerCfg& cfg, const Vec3& cloud_centroid, Rng& rng);

/// Sparse correlation at points[centers] over the same cloud. The centroid
/// defaults to the mean of `points`.
FeatureMatrix sparse_correlate(std::span<const Vec3> points, const FeatureMatrix& in_feats,
                               std::span<const std::size_t> centers, const MlpFilter& filter,
                               const SprinLayerCfg& cfg, Rng& rng);
FeatureMatrix sparse_correlate(std::span<const Vec3> points, const FeatureMatrix& in_feats,
                               std::span<const std::size_t> centers, const MlpFilter& filter,
                               const SprinLayerCfg& cfg, const Vec3& cloud_centroid, Rng& rng);

struct AbstractionResult {
  std::vector<std::size_t> indices;
  std::vector<Vec3> points;
  FeatureMatrix features;
};

/// Farthest point sampling to m centers, then sparse correlation there.
AbstractionResult set_abstraction(std::span<const Vec3> points, const FeatureMatrix& in_feats,
                                  std::size_t m, const MlpFilter& filter, const SprinLayerCfg& cfg,
                                  const Vec3& cloud_centroid, Rng& rng);

/// Sparse correlation at up-sampled points with neighbors and features from
/// the coarser level.
FeatureMatrix feature_propagation(std::span<const Vec3> up_points,
                                  std::span<const Vec3> down_points,
                                  const FeatureMatrix& down_feats, const MlpFilter& filter,
                                  const SprinLayerCfg& cfg, const Vec3& cloud_centroid, Rng& rng);

}  // namespace rotalith
