#include "rotalith/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "rotalith/errors.hpp"

namespace rotalith {

namespace {

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
  return m;
}

void add_error(EquivarianceRow& row, const FeatureMatrix& a, const FeatureMatrix& b) {
  const Eigen::ArrayXXd e = (a - b).array().abs();
  row.max_abs_err = e.size() ? e.maxCoeff() : 0.0;
  row.mean_abs_err = e.size() ? e.mean() : 0.0;
}

}  // namespace

std::string to_string(PipelineKind p) { return p == PipelineKind::prin ? "prin" : "sprin"; }

PipelineKind parse_pipeline(const std::string& name) {
  if (name == "prin") return PipelineKind::prin;
  if (name == "sprin") return PipelineKind::sprin;
  throw ValidationError("unknown pipeline '" + name + "'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ToyProtocolResult run_toy_protocol(const ToyProtocolConfig& cfg) {
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    throw ValidationError("test fraction must lie in (0, 1)");
  }
  const auto n_test = static_cast<std::size_t>(std::ceil(cfg.test_fraction * cfg.n_per_class));
  if (n_test == 0 || n_test >= cfg.n_per_class) {
    throw ValidationError("split leaves an empty train or test set");
  }
  const std::vector<ToyCloud> clouds =
      toy_synth(cfg.classes, cfg.n_per_class, cfg.n_points, cfg.noise, derive_seed(cfg.seed, 0));

  PrinWeights prin_w;
  SprinWeights sprin_w;
  if (cfg.pipeline == PipelineKind::prin) {
    prin_w = init_prin_weights(cfg.prin, derive_seed(cfg.seed, 1));
  } else {
    sprin_w = init_sprin_weights(cfg.sprin, derive_seed(cfg.seed, 1));
  }
  auto global = [&](std::span<const Vec3> pts, std::size_t idx) -> Eigen::VectorXd {
    if (cfg.pipeline == PipelineKind::prin) return prin_forward(pts, prin_w, cfg.prin).global;
    return sprin_forward(pts, sprin_w, cfg.sprin, derive_seed(cfg.seed, 1000 + idx), false).global;
  };

  std::vector<Eigen::VectorXd> train, test, rotated;
  std::vector<int> train_labels, test_labels;
  std::mt19937_64 rotation_rng(derive_seed(cfg.seed, 2));
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    const ToyCloud& c = clouds[i];
    if (i % cfg.n_per_class < cfg.n_per_class - n_test) {
      train.push_back(global(c.points, i));
      train_labels.push_back(c.label);
      continue;
    }
    test.push_back(global(c.points, i));
    const RotationMatrix q = random_rotation(rotation_rng);
    rotated.push_back(global(rotate_points(q, c.points), i));
    test_labels.push_back(c.label);
  }

  HeadConfig head = cfg.head;
  head.n_classes = static_cast<int>(cfg.classes.size());
  const TrainResult trained =
      train_head(stack_rows(train), train_labels, head, cfg.epochs, cfg.lr, derive_seed(cfg.seed, 3));

  ToyProtocolResult r;
  r.n_train = train.size();
  r.n_test = test.size();
  r.loss = trained.loss;
  r.train_accuracy = accuracy(predict(trained.model, stack_rows(train)), train_labels);
  r.nr_accuracy = accuracy(predict(trained.model, stack_rows(test)), test_labels);
  r.ar_accuracy = accuracy(predict(trained.model, stack_rows(rotated)), test_labels);
  return r;
}

std::vector<EquivarianceRow> equivariance_trials(PipelineKind pipeline, int bandwidth, int trials,
                                                 std::uint64_t seed, std::size_t n_points) {
  if (trials < 1) throw ValidationError("need at least one trial");
  std::vector<EquivarianceRow> rows;
  PrinConfig prin_cfg;
  prin_cfg.bandwidth = bandwidth;
  PrinWeights prin_w;
  SprinConfig sprin_cfg;
  SprinWeights sprin_w;
  if (pipeline == PipelineKind::prin) {
    prin_w = init_prin_weights(prin_cfg, derive_seed(seed, 1));
  } else {
    sprin_w = init_sprin_weights(sprin_cfg, derive_seed(seed, 1));
  }

  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(t)));
    const ToyShape shape = static_cast<ToyShape>(t % 3);
    const std::vector<Vec3> pts = normalize_cloud(toy_sample(shape, n_points, 0.02, rng).points);
    const RotationMatrix q = random_rotation(rng);
    const std::vector<Vec3> rotated = rotate_points(q, pts);

    if (pipeline == PipelineKind::sprin) {
      const std::uint64_t fwd = derive_seed(seed, 200 + static_cast<std::uint64_t>(t));
      EquivarianceRow row{t, "haar"};
      add_error(row, sprin_forward(rotated, sprin_w, sprin_cfg, fwd).per_point,
                sprin_forward(pts, sprin_w, sprin_cfg, fwd).per_point);
      rows.push_back(row);
      continue;
    }

    const FeatureMatrix base = prin_forward(pts, prin_w, prin_cfg).per_point;
    const int m = 1 + t % (2 * bandwidth - 1);
    const RotationMatrix z = RotationMatrix::about_z(kTwoPi * m / (2 * bandwidth));
    EquivarianceRow grid_row{t, "grid_z"};
    add_error(grid_row, prin_forward(rotate_points(z, pts), prin_w, prin_cfg).per_point, base);
    rows.push_back(grid_row);

    // Unit-peak input and unit-gain filter so the errors read on an O(1) scale.
    SphericalGrid voxels = voxelize(pts, bandwidth, prin_cfg.sampling());
    const double peak = *std::max_element(voxels.data().begin(), voxels.data().end());
    if (peak > 0.0) {
      for (double& v : voxels.data()) v /= peak;
    }
    const int degree = bandwidth - 1;
    const int c_out = prin_cfg.svc_channels;
    std::vector<double> coeffs(static_cast<std::size_t>(c_out) * sh_count(degree));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      const int l = static_cast<int>(std::sqrt(static_cast<double>(i % sh_count(degree))));
      coeffs[i] = normal(rng) * std::sqrt(4.0 * kPi * (2 * l + 1));
    }
    const SphericalFilter psi =
        SphericalFilter::from_coefficients(bandwidth, c_out, 1, degree, std::move(coeffs));
    const EquivarianceReport svc = equivariance_report(voxels, psi, q);
    rows.push_back({t, "haar_svc", svc.max_abs_err, svc.mean_abs_err});

    EquivarianceRow haar_row{t, "haar_pipeline"};
    add_error(haar_row, prin_forward(rotated, prin_w, prin_cfg).per_point, base);
    rows.push_back(haar_row);
  }
  return rows;
}

}  // namespace rotalith
