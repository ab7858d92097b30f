#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "rotalith/errors.hpp"
#include "rotalith/sprin.hpp"
#include "rotalith/voxelizer.hpp"

namespace rotalith {
namespace {

std::vector<Vec3> random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(g(rng), g(rng), 0.5 * g(rng));
  return normalize_cloud(pts);
}

std::vector<std::size_t> brute_knn(std::span<const Vec3> pts, const Vec3& q, int k) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return (pts[a] - q).squaredNorm() < (pts[b] - q).squaredNorm();
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

TEST(RelativeInvariants, CoincidentPoints) {
  const RelativeInvariant r = relative_invariants({0.3, 0.1, 0.2}, {0.3, 0.1, 0.2}, {0, 0, 0});
  EXPECT_NEAR(r.beta_rel, 0.0, 1e-12);
  EXPECT_EQ(r.s1, 0.0);
  EXPECT_EQ(r.a1, 0.0);
  EXPECT_EQ(r.a2, kPi / 2);
  EXPECT_EQ(r.a3, kPi / 2);
}

TEST(RelativeInvariants, RightIsoscelesTriangle) {
  const RelativeInvariant r = relative_invariants({1, 0, 0}, {0, 0, 1}, {0, 0, 0});
  EXPECT_NEAR(r.beta_rel, kPi / 2, 1e-15);
  EXPECT_NEAR(r.h_rel, 1.0, 1e-15);
  EXPECT_NEAR(r.s1, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(r.s2, 1.0, 1e-15);
  EXPECT_NEAR(r.s3, 1.0, 1e-15);
  EXPECT_NEAR(r.a1, kPi / 4, 1e-15);
  EXPECT_NEAR(r.a2, kPi / 4, 1e-15);
  EXPECT_NEAR(r.a3, kPi / 2, 1e-15);
}

TEST(RelativeInvariants, BetaRelIsPolarAngleInCenterFrame) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int n = 0; n < 200; ++n) {
    const Vec3 xi(u(rng), u(rng), u(rng)), xj(u(rng), u(rng), u(rng));
    const Vec3 local = tmap(cart_to_spherical(xj)).inverse() * xi;
    const double polar = std::atan2(local.head<2>().norm(), local.z());
    EXPECT_NEAR(relative_invariants(xi, xj, Vec3::Zero()).beta_rel, polar, 1e-10);
  }
}

TEST(RelativeInvariants, HaarInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const Vec3 xi(u(rng), u(rng), u(rng)), xj(u(rng), u(rng), u(rng)), c(u(rng), u(rng), u(rng));
    const RotationMatrix q = random_rotation(rng);
    const auto a = relative_invariants(xi, xj, c).to_array();
    const auto b = relative_invariants(q * xi, q * xj, q * c).to_array();
    for (int k = 0; k < RelativeInvariant::kSize; ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(RelativeInvariants, AnglesSumToPi) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n = 0; n < 1000; ++n) {
    const RelativeInvariant r =
        relative_invariants({u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)});
    EXPECT_NEAR(r.a1 + r.a2 + r.a3, kPi, 1e-6);
    for (double a : {r.a1, r.a2, r.a3}) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, kPi);
    }
  }
}

TEST(MlpFilter, ShapesAndValidation) {
  Rng rng(4);
  const std::vector<int> widths{10, 16, 5};
  const MlpFilter f = MlpFilter::random(widths, rng);
  EXPECT_EQ(f.input_dim(), 10);
  EXPECT_EQ(f.output_dim(), 5);
  EXPECT_EQ(f.forward(Eigen::MatrixXd::Ones(3, 10)).rows(), 3);
  EXPECT_THROW(MlpFilter({Eigen::MatrixXd(4, 3), Eigen::MatrixXd(2, 5)}, {Eigen::VectorXd(4), Eigen::VectorXd(2)}),
               ValidationError);
}

TEST(MlpFilter, ConstantFilterEvaluatesToBias) {
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);
  const std::vector<int> hidden{7};
  const MlpFilter f = MlpFilter::constant(11, hidden, v);
  const Eigen::MatrixXd out = f.forward(Eigen::MatrixXd::Random(5, 11));
  for (Eigen::Index r = 0; r < 5; ++r) EXPECT_LE((out.row(r).transpose() - v).norm(), 1e-15);
}

TEST(DilatedKnn, NoDilationIsSortedKnn) {
  const std::vector<Vec3> pts = random_cloud(300, 5);
  Rng rng(6);
  for (std::size_t c : {0u, 17u, 299u}) {
    const auto knn = dilated_knn(pts, c, 20, 1, rng);
    EXPECT_EQ(knn, brute_knn(pts, pts[c], 20));
  }
}

TEST(DilatedKnn, FullNeighborhoodIsAllPoints) {
  const std::vector<Vec3> pts = random_cloud(50, 7);
  Rng rng(8);
  auto all = dilated_knn(pts, 3, 50, 1, rng);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(50);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
}

TEST(DilatedKnn, DilatedSubsetIsDeterministicAndInsideKnn) {
  const std::vector<Vec3> pts = random_cloud(400, 9);
  for (std::size_t c : {2u, 100u, 333u}) {
    Rng r1(10), r2(10);
    const auto a = dilated_knn(pts, c, 32, 2, r1);
    const auto b = dilated_knn(pts, c, 32, 2, r2);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 16u);
    EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), a.size());
    const auto knn = brute_knn(pts, pts[c], 32);
    const std::set<std::size_t> allowed(knn.begin(), knn.end());
    for (std::size_t i : a) EXPECT_TRUE(allowed.count(i));
  }
  Rng r3(11);
  EXPECT_EQ(dilated_knn(pts, 0, 10, 3, r3).size(), 4u);
}

TEST(DilatedKnn, DrawIsUniformOverNeighbors) {
  const std::vector<Vec3> pts = random_cloud(100, 12);
  Rng rng(13);
  std::vector<int> hits(100, 0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    for (std::size_t i : dilated_knn(pts, 0, 8, 4, rng)) ++hits[i];
  }
  for (std::size_t i : brute_knn(pts, pts[0], 8)) {
    EXPECT_NEAR(hits[i] / static_cast<double>(trials), 0.25, 0.02);
  }
}

TEST(DilatedKnn, Errors) {
  const std::vector<Vec3> pts = random_cloud(10, 14);
  Rng rng(15);
  EXPECT_THROW(dilated_knn(pts, 0, 11, 1, rng), ValidationError);
  EXPECT_THROW(dilated_knn(pts, 0, 5, 0, rng), ValidationError);
}

TEST(FarthestPointSampling, Basics) {
  const std::vector<Vec3> square{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  EXPECT_EQ(farthest_point_sampling(square, 1, 2), std::vector<std::size_t>{2});
  EXPECT_EQ(farthest_point_sampling(square, 2, 0), (std::vector<std::size_t>{0, 2}));
  // Remaining corners tie; the lower index wins.
  EXPECT_EQ(farthest_point_sampling(square, 4, 0), (std::vector<std::size_t>{0, 2, 1, 3}));
  EXPECT_THROW(farthest_point_sampling(square, 5, 0), ValidationError);
}

double min_spacing(std::span<const Vec3> pts, std::span<const std::size_t> idx) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) d = std::min(d, (pts[idx[a]] - pts[idx[b]]).norm());
  }
  return d;
}

TEST(FarthestPointSampling, SpacingBeatsRandomSubsets) {
  const std::vector<Vec3> pts = random_cloud(200, 16);
  const auto order = farthest_point_sampling(pts, pts.size(), 0);
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
  const std::span<const std::size_t> head(order.data(), order.size() / 2);
  const double fps_spacing = min_spacing(pts, head);
  std::mt19937_64 rng(17);
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int t = 0; t < 100; ++t) {
    std::shuffle(idx.begin(), idx.end(), rng);
    EXPECT_GE(fps_spacing, min_spacing(pts, std::span<const std::size_t>(idx.data(), head.size())));
  }
}

TEST(CanonicalStart, RotationInvariant) {
  const std::vector<Vec3> pts = random_cloud(300, 18);
  const std::size_t s = canonical_start(pts);
  EXPECT_EQ(canonical_start(rotate_points(random_rotation(19), pts)), s);
}

TEST(SparseCorrelate, ConstantFilterGivesConstant) {
  const std::vector<Vec3> pts = random_cloud(100, 20);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(3, 0.5, 1.5);
  const std::vector<int> hidden{8};
  const MlpFilter f = MlpFilter::constant(RelativeInvariant::kSize, hidden, v);
  std::vector<std::size_t> centers(pts.size());
  std::iota(centers.begin(), centers.end(), 0);
  Rng rng(21);
  const FeatureMatrix out = sparse_correlate(pts, FeatureMatrix(), centers, f, {16, 2}, rng);
  for (Eigen::Index r = 0; r < out.rows(); ++r) EXPECT_LE((out.row(r).transpose() - v).norm(), 1e-12);
}

TEST(SparseCorrelate, SinglePointCloud) {
  const std::vector<Vec3> pts{{0.2, -0.1, 0.4}};
  Rng frng(22);
  const std::vector<int> widths{8, 6, 3};
  const MlpFilter f = MlpFilter::random(widths, frng);
  const std::vector<std::size_t> centers{0};
  Rng rng(23);
  const FeatureMatrix out = sparse_correlate(pts, FeatureMatrix(), centers, f, {1, 1}, rng);
  const auto inv = relative_invariants(pts[0], pts[0], pts[0]).to_array();
  Eigen::MatrixXd row(1, 8);
  for (int k = 0; k < 8; ++k) row(0, k) = inv[k];
  EXPECT_LE((out - f.forward(row)).norm(), 1e-15);
}

class SparseLayerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    pts = random_cloud(256, 24);
    Rng wrng(25);
    const std::vector<int> widths{8 + 4, 32, 6};
    filter = MlpFilter::random(widths, wrng);
    std::mt19937_64 frng(26);
    std::normal_distribution<double> g(0.0, 1.0);
    feats = FeatureMatrix(256, 4);
    for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = g(frng);
    centers.resize(pts.size());
    std::iota(centers.begin(), centers.end(), 0);
  }
  std::vector<Vec3> pts;
  MlpFilter filter;
  FeatureMatrix feats;
  std::vector<std::size_t> centers;
};

TEST_F(SparseLayerTest, HaarInvarianceWithoutDilation) {
  std::mt19937_64 qrng(27);
  for (int t = 0; t < 5; ++t) {
    const RotationMatrix q = random_rotation(qrng);
    Rng r1(28), r2(28);
    const FeatureMatrix a = sparse_correlate(pts, feats, centers, filter, {16, 1}, r1);
    const FeatureMatrix b = sparse_correlate(rotate_points(q, pts), feats, centers, filter, {16, 1}, r2);
    EXPECT_LE((a - b).norm() / a.norm(), 1e-5);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST_F(SparseLayerTest, PermutationEquivariance) {
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 prng(29);
  std::shuffle(perm.begin(), perm.end(), prng);
  std::vector<Vec3> p2(pts.size());
  FeatureMatrix f2(feats.rows(), feats.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    p2[i] = pts[perm[i]];
    f2.row(static_cast<Eigen::Index>(i)) = feats.row(static_cast<Eigen::Index>(perm[i]));
  }
  Rng r1(30), r2(30);
  const FeatureMatrix a = sparse_correlate(pts, feats, centers, filter, {16, 1}, r1);
  const FeatureMatrix b = sparse_correlate(p2, f2, centers, filter, {16, 1}, r2);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_LE((b.row(static_cast<Eigen::Index>(i)) - a.row(static_cast<Eigen::Index>(perm[i]))).norm(), 1e-12);
  }
}

TEST_F(SparseLayerTest, MeanLiesWithinNeighborRange) {
  Rng r1(31), r2(31);
  const SprinLayerCfg cfg{12, 1};
  const FeatureMatrix out = sparse_correlate(pts, feats, centers, filter, cfg, r1);
  const Vec3 c = centroid(pts);
  for (std::size_t j = 0; j < 20; ++j) {
    const auto nb = dilated_knn(pts, j, 12, 1, r2);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(nb.size()), 12);
    for (std::size_t n = 0; n < nb.size(); ++n) {
      const auto inv = relative_invariants(pts[nb[n]], pts[j], c).to_array();
      for (int k = 0; k < 8; ++k) rows(static_cast<Eigen::Index>(n), k) = inv[k];
      rows.row(static_cast<Eigen::Index>(n)).tail(4) = feats.row(static_cast<Eigen::Index>(nb[n]));
    }
    const Eigen::MatrixXd per = filter.forward(rows);
    for (Eigen::Index ch = 0; ch < per.cols(); ++ch) {
      const double v = out(static_cast<Eigen::Index>(j), ch);
      EXPECT_GE(v, per.col(ch).minCoeff() - 1e-12);
      EXPECT_LE(v, per.col(ch).maxCoeff() + 1e-12);
      EXPECT_NEAR(v, per.col(ch).mean(), 1e-12);
    }
  }
}

TEST_F(SparseLayerTest, MaxAggregation) {
  Rng r1(32);
  SprinLayerCfg cfg{12, 1, Aggregation::max};
  const FeatureMatrix mx = sparse_correlate(pts, feats, centers, filter, cfg, r1);
  cfg.aggregation = Aggregation::mean;
  Rng r2(32);
  const FeatureMatrix mean = sparse_correlate(pts, feats, centers, filter, cfg, r2);
  EXPECT_TRUE(((mx - mean).array() >= -1e-12).all());
}

TEST_F(SparseLayerTest, SetAbstractionAllPointsMatchesSparseCorrelate) {
  Rng r1(33), r2(33);
  const Vec3 c = centroid(pts);
  const AbstractionResult sa = set_abstraction(pts, feats, pts.size(), filter, {16, 1}, c, r1);
  const FeatureMatrix sc = sparse_correlate(pts, feats, sa.indices, filter, {16, 1}, c, r2);
  EXPECT_EQ(sa.indices.size(), pts.size());
  EXPECT_LE((sa.features - sc).norm(), 1e-12);
}

TEST_F(SparseLayerTest, SetAbstractionSingleCenter) {
  Rng rng(34);
  const AbstractionResult sa = set_abstraction(pts, feats, 1, filter, {16, 1}, centroid(pts), rng);
  EXPECT_EQ(sa.features.rows(), 1);
  EXPECT_EQ(sa.indices[0], canonical_start(pts));
}

TEST_F(SparseLayerTest, SetAbstractionRotationInvariant) {
  const RotationMatrix q = random_rotation(35);
  const auto rotated = rotate_points(q, pts);
  Rng r1(36), r2(36);
  const AbstractionResult a = set_abstraction(pts, feats, 64, filter, {16, 1}, centroid(pts), r1);
  const AbstractionResult b = set_abstraction(rotated, feats, 64, filter, {16, 1}, centroid(rotated), r2);
  EXPECT_EQ(a.indices, b.indices);
  EXPECT_LE((a.features - b.features).norm() / a.features.norm(), 1e-5);
}

TEST_F(SparseLayerTest, FeaturePropagationReducesToCorrelation) {
  Rng r1(37), r2(37);
  const Vec3 c = centroid(pts);
  const FeatureMatrix fp = feature_propagation(pts, pts, feats, filter, {8, 1}, c, r1);
  const FeatureMatrix sc = sparse_correlate(pts, feats, centers, filter, {8, 1}, c, r2);
  EXPECT_LE((fp - sc).norm(), 1e-12);
}

TEST_F(SparseLayerTest, FeaturePropagationSingleDownPoint) {
  const std::vector<Vec3> down{pts[5]};
  const FeatureMatrix dfeat = feats.row(5);
  const Vec3 c = centroid(pts);
  Rng rng(38);
  const FeatureMatrix fp = feature_propagation(pts, down, dfeat, filter, {1, 1}, c, rng);
  for (std::size_t j = 0; j < 10; ++j) {
    Eigen::MatrixXd row(1, 12);
    const auto inv = relative_invariants(down[0], pts[j], c).to_array();
    for (int k = 0; k < 8; ++k) row(0, k) = inv[k];
    row.block(0, 8, 1, 4) = dfeat;
    EXPECT_LE((fp.row(static_cast<Eigen::Index>(j)) - filter.forward(row)).norm(), 1e-12);
  }
}

TEST_F(SparseLayerTest, FeaturePropagationRotationInvariant) {
  const RotationMatrix q = random_rotation(39);
  std::vector<Vec3> down(pts.begin(), pts.begin() + 64);
  const FeatureMatrix dfeat = feats.topRows(64);
  Rng r1(40), r2(40);
  const FeatureMatrix a = feature_propagation(pts, down, dfeat, filter, {8, 2}, centroid(pts), r1);
  const auto rp = rotate_points(q, pts);
  const auto rd = rotate_points(q, down);
  const FeatureMatrix b = feature_propagation(rp, rd, dfeat, filter, {8, 2}, centroid(rp), r2);
  EXPECT_LE((a - b).norm() / a.norm(), 1e-5);
}

}  // namespace
}  // namespace rotalith
