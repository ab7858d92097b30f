#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "rotalith/errors.hpp"
#include "rotalith/matching.hpp"
#include "rotalith/pipeline.hpp"
#include "rotalith/protocol.hpp"
#include "rotalith/toy.hpp"

namespace rotalith {
namespace {

std::vector<Vec3> toy_cloud(ToyShape shape, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return normalize_cloud(toy_sample(shape, n, 0.02, rng).points);
}

double tie_gap(std::span<const Vec3> pts) {
  // Smallest gap between any two distinct pairwise distances from each point.
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < pts.size(); ++j) d.push_back((pts[i] - pts[j]).norm());
    std::sort(d.begin(), d.end());
    for (std::size_t k = 1; k < d.size(); ++k) gap = std::min(gap, d[k] - d[k - 1]);
  }
  return gap;
}

// ---------------------------------------------------------------------------
// Dense pipeline.

TEST(PrinConfig, Validation) {
  PrinConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.bandwidth = 1;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = PrinConfig{};
  cfg.fc_widths = {50, 0};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = PrinConfig{};
  cfg.shells_as_channels = true;
  EXPECT_EQ(cfg.input_channels(), 16);
}

TEST(PrinForward, ZeroFinalLayerGivesRectifiedBias) {
  PrinConfig cfg;
  cfg.bandwidth = 4;
  PrinWeights w = init_prin_weights(cfg, 1);
  DenseLayer& last = w.point_fc.back();
  last.weight.setZero();
  last.bias = Eigen::VectorXd::LinSpaced(last.bias.size(), -1.0, 1.0);
  const auto pts = toy_cloud(ToyShape::cube, 200, 2);
  const ForwardResult r = prin_forward(pts, w, cfg);
  ASSERT_EQ(r.per_point.rows(), 200);
  const Eigen::RowVectorXd expected = last.bias.cwiseMax(0.0).transpose();
  for (Eigen::Index i = 0; i < r.per_point.rows(); ++i) {
    EXPECT_LE((r.per_point.row(i) - expected).norm(), 1e-15);
  }
  EXPECT_EQ(r.global.size(), cfg.fc_widths.back());
}

TEST(PrinForward, GridZRotationIsExact) {
  PrinConfig cfg;
  const PrinWeights w = init_prin_weights(cfg, 3);
  const auto pts = toy_cloud(ToyShape::cylinder, 512, 4);
  const ForwardResult base = prin_forward(pts, w, cfg);
  ASSERT_GT(base.per_point.norm(), 0.0);
  for (int m : {1, 5, 15}) {
    const RotationMatrix z = RotationMatrix::about_z(kTwoPi * m / (2 * cfg.bandwidth));
    const ForwardResult rot = prin_forward(rotate_points(z, pts), w, cfg);
    EXPECT_LE((rot.per_point - base.per_point).cwiseAbs().maxCoeff(), 1e-8) << "m " << m;
    EXPECT_LE((rot.global - base.global).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(PrinForward, BruteForceRouteMatchesSpectral) {
  PrinConfig cfg;
  cfg.bandwidth = 4;
  cfg.svc_channels = 4;
  cfg.group_channels = {3};
  const PrinWeights w = init_prin_weights(cfg, 5);
  const auto pts = toy_cloud(ToyShape::sphere, 300, 6);
  const ForwardResult a = prin_forward(pts, w, cfg);
  cfg.impl = SvcImpl::bruteforce;
  const ForwardResult b = prin_forward(pts, w, cfg);
  EXPECT_LE(relative_deviation(b.per_point, a.per_point), 1e-6);
}

TEST(PrinForward, HaarDeviationRegressionBound) {
  // Voxelization sampling dominates; the bound pins the measured value at
  // B = 8 with 1024 points (about 0.36).
  PrinConfig cfg;
  const PrinWeights w = init_prin_weights(cfg, 7);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 3; ++t) {
    const auto pts = toy_cloud(static_cast<ToyShape>(t), 1024, 9 + t);
    const ForwardResult base = prin_forward(pts, w, cfg);
    const ForwardResult rot = prin_forward(rotate_points(random_rotation(rng), pts), w, cfg);
    EXPECT_LE(relative_deviation(rot.per_point, base.per_point), 0.6) << "trial " << t;
  }
}

TEST(PrinForward, ShellsAsChannelsStaysGridZExact) {
  PrinConfig cfg;
  cfg.bandwidth = 4;
  cfg.shells_as_channels = true;
  const PrinWeights w = init_prin_weights(cfg, 10);
  const auto pts = toy_cloud(ToyShape::cube, 300, 11);
  const ForwardResult base = prin_forward(pts, w, cfg);
  const ForwardResult rot = prin_forward(rotate_points(RotationMatrix::about_z(kPi / 2), pts), w, cfg);
  EXPECT_LE((rot.per_point - base.per_point).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(PrinForward, WeightMismatchThrows) {
  PrinConfig cfg;
  cfg.bandwidth = 4;
  PrinWeights w = init_prin_weights(cfg, 12);
  cfg.bandwidth = 5;
  const auto pts = toy_cloud(ToyShape::cube, 100, 13);
  EXPECT_THROW(prin_forward(pts, w, cfg), ValidationError);
}

// ---------------------------------------------------------------------------
// Sparse pipeline.

SprinConfig small_sprin() {
  SprinConfig cfg;
  cfg.channels = 16;
  cfg.filter_hidden = {16};
  return cfg;
}

TEST(SprinConfig, Validation) {
  SprinConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  for (const SprinStage& s : cfg.without_dilation().encoder) {
    for (const SprinLayerCfg& l : s.layers) EXPECT_EQ(l.d, 1);
  }
  cfg.decoder.pop_back();
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = SprinConfig{};
  cfg.encoder[0].centers = 10;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(SprinForward, HaarInvarianceWithoutDilation) {
  const SprinConfig cfg = small_sprin().without_dilation();
  const SprinWeights w = init_sprin_weights(cfg, 14);
  std::mt19937_64 rng(15);
  for (int t = 0; t < 20; ++t) {
    const auto pts = toy_cloud(static_cast<ToyShape>(t % 3), 256, 100 + t);
    ASSERT_GT(tie_gap(pts), 1e-9);
    const RotationMatrix q = random_rotation(rng);
    const ForwardResult a = sprin_forward(pts, w, cfg, 16);
    const ForwardResult b = sprin_forward(rotate_points(q, pts), w, cfg, 16);
    ASSERT_EQ(a.per_point.rows(), 256);
    for (Eigen::Index i = 0; i < a.per_point.rows(); ++i) {
      const double n = a.per_point.row(i).norm();
      const double d = (a.per_point.row(i) - b.per_point.row(i)).norm();
      EXPECT_LE(n > 0 ? d / n : d, 1e-5);
    }
    EXPECT_LE((a.global - b.global).norm() / std::max(a.global.norm(), 1e-300), 1e-5);
  }
}

TEST(SprinForward, DilatedStackInvariantUnderSameSeed) {
  const SprinConfig cfg = small_sprin();
  const SprinWeights w = init_sprin_weights(cfg, 17);
  const auto pts = toy_cloud(ToyShape::cube, 512, 18);
  const ForwardResult a = sprin_forward(pts, w, cfg, 19);
  const ForwardResult b = sprin_forward(rotate_points(random_rotation(20), pts), w, cfg, 19);
  EXPECT_LE(relative_deviation(b.per_point, a.per_point), 1e-5);
}

TEST(SprinForward, PermutationPermutesRows) {
  const SprinConfig cfg = small_sprin().without_dilation();
  const SprinWeights w = init_sprin_weights(cfg, 21);
  const auto pts = toy_cloud(ToyShape::sphere, 256, 22);
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 prng(23);
  std::shuffle(perm.begin(), perm.end(), prng);
  std::vector<Vec3> shuffled;
  for (std::size_t i : perm) shuffled.push_back(pts[i]);
  const ForwardResult a = sprin_forward(pts, w, cfg, 24);
  const ForwardResult b = sprin_forward(shuffled, w, cfg, 24);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_LE((b.per_point.row(static_cast<Eigen::Index>(i)) -
               a.per_point.row(static_cast<Eigen::Index>(perm[i])))
                  .norm(),
              1e-9);
  }
}

TEST(SprinForward, ConstantFiltersGiveCloudIndependentGlobal) {
  const SprinConfig cfg = small_sprin();
  SprinWeights w = init_sprin_weights(cfg, 25);
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(cfg.channels, 0.5);
  for (auto* group : {&w.encoder, &w.decoder}) {
    for (auto& stage : *group) {
      for (MlpFilter& f : stage) f = MlpFilter::constant(f.input_dim(), cfg.filter_hidden, v);
    }
  }
  const ForwardResult a = sprin_forward(toy_cloud(ToyShape::sphere, 300, 26), w, cfg, 27);
  const ForwardResult b = sprin_forward(toy_cloud(ToyShape::cube, 500, 28), w, cfg, 29);
  EXPECT_LE((a.global - b.global).norm(), 1e-12);
}

TEST(SprinForward, SmallCloudsRun) {
  const SprinConfig cfg = small_sprin();
  const SprinWeights w = init_sprin_weights(cfg, 30);
  const auto pts = toy_cloud(ToyShape::cube, 40, 31);
  const ForwardResult r = sprin_forward(pts, w, cfg, 32);
  EXPECT_EQ(r.per_point.rows(), 40);
  EXPECT_TRUE(r.per_point.allFinite());
  const ForwardResult g = sprin_forward(pts, w, cfg, 32, false);
  EXPECT_EQ(g.per_point.size(), 0);
  EXPECT_LE((g.global - r.global).norm(), 1e-15);
}

TEST(InitWeights, DeterministicPerSeed) {
  const SprinConfig cfg = small_sprin();
  const auto a = encode_archive(sprin_to_archive(cfg, init_sprin_weights(cfg, 1)));
  const auto b = encode_archive(sprin_to_archive(cfg, init_sprin_weights(cfg, 1)));
  const auto c = encode_archive(sprin_to_archive(cfg, init_sprin_weights(cfg, 2)));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  PrinConfig pcfg;
  pcfg.bandwidth = 4;
  EXPECT_EQ(encode_archive(prin_to_archive(pcfg, init_prin_weights(pcfg, 1))),
            encode_archive(prin_to_archive(pcfg, init_prin_weights(pcfg, 1))));
  EXPECT_NE(encode_archive(prin_to_archive(pcfg, init_prin_weights(pcfg, 1))),
            encode_archive(prin_to_archive(pcfg, init_prin_weights(pcfg, 2))));
}

TEST(InitWeights, VarianceIsTwoOverFanIn) {
  const SprinConfig cfg;
  const SprinWeights w = init_sprin_weights(cfg, 3);
  auto check = [](const Eigen::MatrixXd& m) {
    const double var = m.array().square().mean() - std::pow(m.mean(), 2);
    EXPECT_NEAR(var / (2.0 / m.cols()), 1.0, 0.1) << m.rows() << "x" << m.cols();
  };
  check(w.global_fc[0].weight);
  check(w.point_fc[1].weight);
  check(w.encoder[1][0].weights()[1]);
  check(w.decoder[0][1].weights()[0]);
}

// ---------------------------------------------------------------------------
// Archives.

TEST(WeightArchive, PrinRoundTrip) {
  PrinConfig cfg;
  cfg.bandwidth = 4;
  cfg.mode = SamplingMode::uniform;
  cfg.xi = 0.05;
  const auto first = prin_from_archive(decode_archive(encode_archive(prin_to_archive(cfg, init_prin_weights(cfg, 4)))));
  EXPECT_EQ(first.first.bandwidth, 4);
  EXPECT_EQ(first.first.mode, SamplingMode::uniform);
  EXPECT_NEAR(first.first.xi, 0.05, 1e-8);
  const auto bytes = encode_archive(prin_to_archive(first.first, first.second));
  const auto second = prin_from_archive(decode_archive(bytes));
  EXPECT_EQ(encode_archive(prin_to_archive(second.first, second.second)), bytes);
  const auto pts = toy_cloud(ToyShape::cube, 100, 5);
  EXPECT_LE(relative_deviation(prin_forward(pts, second.second, second.first).per_point,
                               prin_forward(pts, first.second, first.first).per_point),
            1e-12);
}

TEST(WeightArchive, SprinRoundTrip) {
  SprinConfig cfg = small_sprin();
  cfg.aggregation = Aggregation::max;
  const auto first = sprin_from_archive(decode_archive(encode_archive(sprin_to_archive(cfg, init_sprin_weights(cfg, 6)))));
  EXPECT_EQ(first.first.aggregation, Aggregation::max);
  EXPECT_EQ(first.first.encoder.size(), cfg.encoder.size());
  EXPECT_EQ(first.first.encoder[1].layers[0].k, 72);
  EXPECT_EQ(first.first.encoder[1].layers[0].d, 3);
  EXPECT_EQ(config_hash(first.first), config_hash(cfg));
  const auto bytes = encode_archive(sprin_to_archive(first.first, first.second));
  const auto second = sprin_from_archive(decode_archive(bytes));
  EXPECT_EQ(encode_archive(sprin_to_archive(second.first, second.second)), bytes);
}

TEST(WeightArchive, MissingTensorIsFormatError) {
  TensorArchive a;
  a.add("prin.config", Tensor{{5}, {8, 0.03125f, 0, 0, 1}});
  EXPECT_THROW(prin_from_archive(a), FormatError);
}

TEST(DescriptorArchive, RoundTripExact) {
  Descriptor d;
  d.features = Eigen::MatrixXd::Random(37, 5).cast<float>().cast<double>();
  d.shape_id = "cube_03";
  d.indices.resize(37);
  std::iota(d.indices.begin(), d.indices.end(), 1000);
  d.config_hash = config_hash(SprinConfig{});
  const Descriptor r = descriptor_from_archive(decode_archive(encode_archive(descriptor_to_archive(d))));
  EXPECT_EQ(r.features, d.features);
  EXPECT_EQ(r.shape_id, d.shape_id);
  EXPECT_EQ(r.indices, d.indices);
  EXPECT_EQ(r.config_hash, d.config_hash);
}

TEST(ConfigHash, SensitiveToConfig) {
  PrinConfig a, b;
  b.bandwidth = 16;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(SprinConfig{}), config_hash(SprinConfig{}.without_dilation()));
}

// ---------------------------------------------------------------------------
// Matching.

Descriptor descriptor_of(FeatureMatrix f) {
  Descriptor d;
  d.features = std::move(f);
  return d;
}

TEST(MatchDescriptors, SelfIsIdentity) {
  const Descriptor a = descriptor_of(Eigen::MatrixXd::Random(200, 8));
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) labels[i] = i % 4;
  const MatchResult r = match_descriptors(a, a, labels, labels);
  EXPECT_EQ(identity_rate(r.map), 1.0);
  ASSERT_TRUE(r.accuracy.has_value());
  EXPECT_EQ(*r.accuracy, 1.0);
}

TEST(MatchDescriptors, RecoversPermutation) {
  const FeatureMatrix f = Eigen::MatrixXd::Random(150, 6);
  std::vector<std::size_t> perm(150);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(33);
  std::shuffle(perm.begin(), perm.end(), rng);
  FeatureMatrix g(150, 6);
  for (std::size_t i = 0; i < 150; ++i) g.row(static_cast<Eigen::Index>(i)) = f.row(static_cast<Eigen::Index>(perm[i]));
  const MatchResult r = match_descriptors(descriptor_of(f), descriptor_of(g));
  for (std::size_t i = 0; i < 150; ++i) EXPECT_EQ(perm[r.map[i]], i);
}

TEST(MatchDescriptors, Errors) {
  EXPECT_THROW(match_descriptors(descriptor_of(Eigen::MatrixXd::Zero(3, 4)), descriptor_of(Eigen::MatrixXd::Zero(3, 5))),
               ValidationError);
  EXPECT_THROW(match_descriptors(descriptor_of(Eigen::MatrixXd::Zero(0, 4)), descriptor_of(Eigen::MatrixXd::Zero(3, 4))),
               ValidationError);
  const std::vector<int> short_labels{1};
  EXPECT_THROW(match_descriptors(descriptor_of(Eigen::MatrixXd::Zero(3, 4)), descriptor_of(Eigen::MatrixXd::Zero(3, 4)),
                                 short_labels, short_labels),
               ValidationError);
}

TEST(MatchDescriptors, RotatedSelfWithSprinFeatures) {
  const SprinConfig cfg;
  const SprinWeights w = init_sprin_weights(cfg, 34);
  const auto pts = toy_cloud(ToyShape::cube, 512, 35);
  const ForwardResult a = sprin_forward(pts, w, cfg, 36);
  const ForwardResult b = sprin_forward(rotate_points(random_rotation(37), pts), w, cfg, 36);
  const MatchResult r = match_descriptors(descriptor_of(a.per_point), descriptor_of(b.per_point));
  EXPECT_GE(identity_rate(r.map), 0.99);
}

// ---------------------------------------------------------------------------
// Synthetic data and the toy protocol.

TEST(ToySample, NoiselessSphereHasUnitNorms) {
  std::mt19937_64 rng(38);
  const ToyCloud c = toy_sample(ToyShape::sphere, 500, 0.0, rng);
  for (const Vec3& p : c.points) EXPECT_NEAR(p.norm(), 1.0, 1e-12);
}

TEST(ToySample, PartsMatchGeometry) {
  std::mt19937_64 rng(39);
  const ToyCloud cube = toy_sample(ToyShape::cube, 300, 0.0, rng);
  for (std::size_t i = 0; i < cube.points.size(); ++i) {
    EXPECT_NEAR(cube.points[i].cwiseAbs().maxCoeff(), 1.0, 1e-12);
    EXPECT_GE(cube.parts[i], 0);
    EXPECT_LT(cube.parts[i], 6);
  }
  const ToyCloud cyl = toy_sample(ToyShape::cylinder, 300, 0.0, rng);
  for (std::size_t i = 0; i < cyl.points.size(); ++i) {
    const Vec3& p = cyl.points[i];
    if (cyl.parts[i] == 0) EXPECT_NEAR(p.head<2>().norm(), 1.0, 1e-12);
    else EXPECT_NEAR(std::abs(p.z()), 1.0, 1e-12);
  }
}

TEST(ToySynth, DeterministicAndBalanced) {
  const std::vector<ToyShape> classes{ToyShape::sphere, ToyShape::cube, ToyShape::cylinder};
  const auto a = toy_synth(classes, 7, 128, 0.01, 40);
  const auto b = toy_synth(classes, 7, 128, 0.01, 40);
  ASSERT_EQ(a.size(), 21u);
  std::vector<int> counts(3, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++counts[a[i].label];
    EXPECT_EQ(a[i].points, b[i].points);
    EXPECT_EQ(a[i].parts, b[i].parts);
    double r = 0.0;
    for (const Vec3& p : a[i].points) r = std::max(r, p.norm());
    EXPECT_NEAR(r, 1.0, 1e-12);
  }
  EXPECT_EQ(counts, (std::vector<int>{7, 7, 7}));
  EXPECT_THROW(toy_synth(classes, 2, 32, 0.0, 1), ValidationError);
  EXPECT_THROW(parse_toy_shape("torus"), ValidationError);
}

TEST(ToyProtocol, SprinSmallRun) {
  ToyProtocolConfig cfg;
  cfg.n_per_class = 12;
  cfg.n_points = 128;
  cfg.sprin = small_sprin();
  cfg.seed = 41;
  const ToyProtocolResult r = run_toy_protocol(cfg);
  EXPECT_EQ(r.n_test, 12u);
  EXPECT_EQ(r.n_train, 24u);
  EXPECT_EQ(r.loss.size(), 200u);
  EXPECT_EQ(r.nr_accuracy, r.ar_accuracy);
  const ToyProtocolResult again = run_toy_protocol(cfg);
  EXPECT_EQ(again.loss, r.loss);
}

TEST(ToyProtocol, DaasNotWorseThanUniformUnderRotation) {
  ToyProtocolConfig cfg;
  cfg.pipeline = PipelineKind::prin;
  cfg.n_per_class = 30;
  cfg.n_points = 512;
  cfg.seed = 42;
  cfg.prin.mode = SamplingMode::daas;
  const ToyProtocolResult daas = run_toy_protocol(cfg);
  cfg.prin.mode = SamplingMode::uniform;
  const ToyProtocolResult uniform = run_toy_protocol(cfg);
  EXPECT_GE(daas.ar_accuracy, uniform.ar_accuracy);
}

TEST(DeriveSeed, Streams) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
  EXPECT_THROW(parse_pipeline("dense"), ValidationError);
}

}  // namespace
}  // namespace rotalith
