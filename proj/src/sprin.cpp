#include "rotalith/sprin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Geometry>

#include "rotalith/errors.hpp"

namespace rotalith {

namespace {

constexpr double kDegenerateSide = 1e-12;

// Angle between two vectors, accurate near 0 and pi.
double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

// Queries are processed in blocks so the batched filter input stays small.
constexpr std::size_t kQueryBlock = 256;

}  // namespace

RelativeInvariant relative_invariants(const Vec3& xi, const Vec3& xj, const Vec3& c) {
  RelativeInvariant r;
  r.h_rel = xi.norm();
  // T(x_j)^-1 maps dir(x_j) to the north pole, so the polar angle of
  // T(x_j)^-1 x_i is the angle between x_i and x_j.
  r.beta_rel = (xi.norm() == 0.0 || xj.norm() == 0.0) ? 0.0 : angle_between(xi, xj);
  r.s1 = (xi - xj).norm();
  r.s2 = (xi - c).norm();
  r.s3 = (xj - c).norm();
  if (r.s1 < kDegenerateSide || r.s2 < kDegenerateSide || r.s3 < kDegenerateSide) {
    r.a1 = 0.0;
    r.a2 = kPi / 2;
    r.a3 = kPi / 2;
    return r;
  }
  r.a1 = angle_between(xj - xi, c - xi);
  r.a2 = angle_between(xi - xj, c - xj);
  r.a3 = angle_between(xi - c, xj - c);
  return r;
}

// ---------------------------------------------------------------------------
// MlpFilter

MlpFilter::MlpFilter(std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases)
    : weights_(std::move(weights)), biases_(std::move(biases)) {
  if (weights_.empty() || weights_.size() != biases_.size()) {
    throw ValidationError("filter needs one bias per weight matrix");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (biases_[l].size() != weights_[l].rows()) {
      throw ValidationError("filter layer " + std::to_string(l) + " bias size mismatch");
    }
    if (l > 0 && weights_[l].cols() != weights_[l - 1].rows()) {
      throw ValidationError("filter layer " + std::to_string(l) + " input width mismatch");
    }
  }
}

MlpFilter MlpFilter::random(std::span<const int> widths, Rng& rng) {
  if (widths.size() < 2) throw ValidationError("filter needs at least input and output widths");
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l], fan_out = widths[l + 1];
    if (fan_in < 1 || fan_out < 1) throw ValidationError("filter widths must be positive");
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = normal(rng);
    }
    weights.push_back(std::move(w));
    biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return MlpFilter(std::move(weights), std::move(biases));
}

MlpFilter MlpFilter::constant(int input_dim, std::span<const int> hidden,
                              const Eigen::VectorXd& value) {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  int prev = input_dim;
  for (int width : hidden) {
    weights.push_back(Eigen::MatrixXd::Zero(width, prev));
    biases.push_back(Eigen::VectorXd::Zero(width));
    prev = width;
  }
  weights.push_back(Eigen::MatrixXd::Zero(value.size(), prev));
  biases.push_back(value);
  return MlpFilter(std::move(weights), std::move(biases));
}

int MlpFilter::input_dim() const {
  return weights_.empty() ? 0 : static_cast<int>(weights_.front().cols());
}

int MlpFilter::output_dim() const {
  return weights_.empty() ? 0 : static_cast<int>(weights_.back().rows());
}

Eigen::MatrixXd MlpFilter::forward(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != input_dim()) {
    throw ValidationError("filter expects " + std::to_string(input_dim()) +
                          " inputs, got " + std::to_string(rows.cols()));
  }
  Eigen::MatrixXd x = rows;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd y = x * weights_[l].transpose();
    y.rowwise() += biases_[l].transpose();
    if (l + 1 < weights_.size()) y = y.cwiseMax(0.0);
    x = std::move(y);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Neighborhoods and sampling

std::vector<std::size_t> dilated_knn(std::span<const Vec3> points, const Vec3& query, int k,
                                     int d, Rng& rng) {
  if (k < 1) throw ValidationError("k must be at least 1");
  if (d < 1) throw ValidationError("dilation must be at least 1");
  if (static_cast<std::size_t>(k) > points.size()) {
    throw ValidationError("k = " + std::to_string(k) + " exceeds the " +
                          std::to_string(points.size()) + " available points");
  }
  std::vector<double> dist(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) dist[i] = (points[i] - query).squaredNorm();
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                    });
  order.resize(k);
  if (d == 1) return order;

  // Partial Fisher-Yates over neighbor ranks, then restore rank order.
  const std::size_t keep = (static_cast<std::size_t>(k) + d - 1) / d;
  std::vector<std::size_t> ranks(k);
  std::iota(ranks.begin(), ranks.end(), std::size_t{0});
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ranks.size() - 1);
    std::swap(ranks[i], ranks[pick(rng)]);
  }
  ranks.resize(keep);
  std::sort(ranks.begin(), ranks.end());
  std::vector<std::size_t> out;
  out.reserve(keep);
  for (std::size_t r : ranks) out.push_back(order[r]);
  return out;
}

std::vector<std::size_t> dilated_knn(std::span<const Vec3> points, std::size_t center_idx, int k,
                                     int d, Rng& rng) {
  if (center_idx >= points.size()) throw ValidationError("center index out of range");
  return dilated_knn(points, points[center_idx], k, d, rng);
}

std::vector<std::size_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t m,
                                                 std::size_t start_idx) {
  if (m < 1 || m > points.size()) {
    throw ValidationError("cannot sample " + std::to_string(m) + " of " +
                          std::to_string(points.size()) + " points");
  }
  if (start_idx >= points.size()) throw ValidationError("start index out of range");
  std::vector<std::size_t> picked{start_idx};
  picked.reserve(m);
  std::vector<double> nearest(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    nearest[i] = (points[i] - points[start_idx]).squaredNorm();
  }
  while (picked.size() < m) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (nearest[i] > nearest[best]) best = i;
    }
    picked.push_back(best);
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], (points[i] - points[best]).squaredNorm());
    }
  }
  return picked;
}

Vec3 centroid(std::span<const Vec3> points) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points) c += p;
  return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

std::size_t canonical_start(std::span<const Vec3> points) {
  if (points.empty()) throw ValidationError("empty cloud");
  const Vec3 c = centroid(points);
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - c).squaredNorm();
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Correlation

FeatureMatrix correlate_points(std::span<const Vec3> queries, std::span<const Vec3> support,
                               const FeatureMatrix& support_feats, const MlpFilter& filter,
                               const SprinLayerCfg& cfg, const Vec3& cloud_centroid, Rng& rng) {
  const int feat_dim = static_cast<int>(support_feats.cols());
  if (feat_dim > 0 && support_feats.rows() != static_cast<Eigen::Index>(support.size())) {
    throw ValidationError("feature rows do not match the support points");
  }
  if (filter.input_dim() != RelativeInvariant::kSize + feat_dim) {
    throw ValidationError("filter input width " + std::to_string(filter.input_dim()) +
                          " != 8 + " + std::to_string(feat_dim));
  }
  const int out_dim = filter.output_dim();
  FeatureMatrix out(static_cast<Eigen::Index>(queries.size()), out_dim);

  for (std::size_t block = 0; block < queries.size(); block += kQueryBlock) {
    const std::size_t block_end = std::min(queries.size(), block + kQueryBlock);
    std::vector<std::vector<std::size_t>> neighbors;
    std::size_t rows = 0;
    for (std::size_t q = block; q < block_end; ++q) {
      neighbors.push_back(dilated_knn(support, queries[q], cfg.k, cfg.d, rng));
      rows += neighbors.back().size();
    }
    Eigen::MatrixXd input(static_cast<Eigen::Index>(rows), filter.input_dim());
    Eigen::Index row = 0;
    for (std::size_t q = block; q < block_end; ++q) {
      for (std::size_t i : neighbors[q - block]) {
        const auto inv = relative_invariants(support[i], queries[q], cloud_centroid).to_array();
        for (int c = 0; c < RelativeInvariant::kSize; ++c) input(row, c) = inv[c];
        if (feat_dim > 0) {
          input.row(row).tail(feat_dim) = support_feats.row(static_cast<Eigen::Index>(i));
        }
        ++row;
      }
    }
    const Eigen::MatrixXd response = filter.forward(input);
    row = 0;
    for (std::size_t q = block; q < block_end; ++q) {
      const auto count = static_cast<Eigen::Index>(neighbors[q - block].size());
      const auto slab = response.middleRows(row, count);
      if (cfg.aggregation == Aggregation::max) {
        out.row(static_cast<Eigen::Index>(q)) = slab.colwise().maxCoeff();
      } else {
        out.row(static_cast<Eigen::Index>(q)) = slab.colwise().mean();
      }
      row += count;
    }
  }
  return out;
}

FeatureMatrix sparse_correlate(std::span<const Vec3> points, const FeatureMatrix& in_feats,
                               std::span<const std::size_t> centers, const MlpFilter& filter,
                               const SprinLayerCfg& cfg, const Vec3& cloud_centroid, Rng& rng) {
  std::vector<Vec3> queries;
  queries.reserve(centers.size());
  for (std::size_t c : centers) {
    if (c >= points.size()) throw ValidationError("center index out of range");
    queries.push_back(points[c]);
  }
  return correlate_points(queries, points, in_feats, filter, cfg, cloud_centroid, rng);
}

FeatureMatrix sparse_correlate(std::span<const Vec3> points, const FeatureMatrix& in_feats,
                               std::span<const std::size_t> centers, const MlpFilter& filter,
                               const SprinLayerCfg& cfg, Rng& rng) {
  return sparse_correlate(points, in_feats, centers, filter, cfg, centroid(points), rng);
}

AbstractionResult set_abstraction(std::span<const Vec3> points, const FeatureMatrix& in_feats,
                                  std::size_t m, const MlpFilter& filter, const SprinLayerCfg& cfg,
                                  const Vec3& cloud_centroid, Rng& rng) {
  AbstractionResult result;
  result.indices = farthest_point_sampling(points, m, canonical_start(points));
  for (std::size_t i : result.indices) result.points.push_back(points[i]);
  result.features =
      sparse_correlate(points, in_feats, result.indices, filter, cfg, cloud_centroid, rng);
  return result;
}

FeatureMatrix feature_propagation(std::span<const Vec3> up_points,
                                  std::span<const Vec3> down_points,
                                  const FeatureMatrix& down_feats, const MlpFilter& filter,
                                  const SprinLayerCfg& cfg, const Vec3& cloud_centroid, Rng& rng) {
  return correlate_points(up_points, down_points, down_feats, filter, cfg, cloud_centroid, rng);
}

}  // namespace rotalith
