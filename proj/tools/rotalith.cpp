// Command-line front end. Every subcommand prints CSV or key,value lines.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rotalith/errors.hpp"
#include "rotalith/io.hpp"
#include "rotalith/matching.hpp"
#include "rotalith/parallel.hpp"
#include "rotalith/pipeline.hpp"
#include "rotalith/protocol.hpp"
#include "rotalith/sprin.hpp"
#include "rotalith/toy.hpp"
#include "rotalith/voxelizer.hpp"

namespace {

using namespace rotalith;

enum ExitCode { kOk = 0, kUsage = 1, kInput = 2, kNumeric = 3 };

const std::map<std::string, SamplingMode> kModes{{"daas", SamplingMode::daas},
                                                 {"uniform", SamplingMode::uniform}};
const std::map<std::string, PipelineKind> kPipelines{{"prin", PipelineKind::prin},
                                                     {"sprin", PipelineKind::sprin}};
const std::map<std::string, SvcImpl> kImpls{{"brute", SvcImpl::bruteforce},
                                            {"spectral", SvcImpl::spectral}};

std::vector<int> read_labels(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<int> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = line.substr(0, line.find('#'));
    std::istringstream fields(line);
    int v;
    if (!(fields >> v)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw FormatError(path + ": line " + std::to_string(line_no) + ": expected an integer label");
    }
    std::string extra;
    if (fields >> extra) {
      throw FormatError(path + ": line " + std::to_string(line_no) + ": trailing text");
    }
    labels.push_back(v);
  }
  return labels;
}

std::vector<Vec3> load_points(const std::string& path, bool normalize) {
  Cloud c = read_cloud(path);
  return normalize ? normalize_cloud(c.points) : c.points;
}

// ---------------------------------------------------------------------------

struct VoxelizeArgs {
  std::string in, out, csv;
  int bandwidth = 8;
  double xi = 1.0 / 32.0;
  SamplingMode mode = SamplingMode::daas;
  bool normalize = false;
};

int run_voxelize(const VoxelizeArgs& a) {
  const std::vector<Vec3> pts = load_points(a.in, a.normalize);
  const SphericalGrid g = voxelize(pts, a.bandwidth, {a.xi, a.mode});
  TensorArchive archive;
  archive.add("grid", tensor_from_grid(g));
  write_archive(a.out, archive);
  if (!a.csv.empty()) write_grid_csv(a.csv, g);
  std::size_t occupied = 0;
  for (double v : g.data()) occupied += v != 0.0;
  std::printf("points,%zu\nbandwidth,%d\noccupied_voxels,%zu\ntotal_voxels,%zu\n", pts.size(),
              a.bandwidth, occupied, g.data().size());
  return kOk;
}

struct EquivArgs {
  PipelineKind pipeline = PipelineKind::sprin;
  int bandwidth = 8;
  int trials = 5;
  std::uint64_t seed = 0;
  std::size_t points = 512;
};

int run_equiv(const EquivArgs& a) {
  const auto rows = equivariance_trials(a.pipeline, a.bandwidth, a.trials, a.seed, a.points);
  std::printf("trial,rotation,max_abs_err,mean_abs_err\n");
  for (const auto& r : rows) {
    std::printf("%d,%s,%.6e,%.6e\n", r.trial, r.rotation.c_str(), r.max_abs_err, r.mean_abs_err);
  }
  return kOk;
}

struct FeaturesArgs {
  PipelineKind pipeline = PipelineKind::sprin;
  std::string in, weights, out, shape_id;
  std::uint64_t seed = 0;
  bool global = false;
  bool normalize = false;
};

int run_features(const FeaturesArgs& a) {
  const std::vector<Vec3> pts = load_points(a.in, a.normalize);
  Descriptor d;
  d.shape_id = a.shape_id.empty() ? a.in : a.shape_id;
  ForwardResult r;
  if (a.pipeline == PipelineKind::prin) {
    auto [cfg, w] = a.weights.empty() ? std::pair{PrinConfig{}, init_prin_weights({}, a.seed)}
                                      : prin_from_archive(read_archive(a.weights));
    r = prin_forward(pts, w, cfg);
    d.config_hash = config_hash(cfg);
  } else {
    auto [cfg, w] = a.weights.empty() ? std::pair{SprinConfig{}, init_sprin_weights({}, a.seed)}
                                      : sprin_from_archive(read_archive(a.weights));
    r = sprin_forward(pts, w, cfg, a.seed, !a.global);
    d.config_hash = config_hash(cfg);
  }
  if (a.global) {
    d.features = r.global.transpose();
  } else {
    d.features = r.per_point;
    for (std::size_t i = 0; i < pts.size(); ++i) d.indices.push_back(i);
  }
  if (!d.features.allFinite()) throw NumericError("features contain NaN or infinity");
  write_archive(a.out, descriptor_to_archive(d));
  std::printf("rows,%td\nchannels,%td\nconfig_hash,%016llx\n", d.features.rows(),
              d.features.cols(), static_cast<unsigned long long>(d.config_hash));
  return kOk;
}

struct MatchArgs {
  std::string a, b, labels_a, labels_b, csv;
};

int run_match(const MatchArgs& a) {
  const Descriptor da = descriptor_from_archive(read_archive(a.a));
  const Descriptor db = descriptor_from_archive(read_archive(a.b));
  std::vector<int> la, lb;
  if (!a.labels_a.empty()) la = read_labels(a.labels_a);
  if (!a.labels_b.empty()) lb = read_labels(a.labels_b);
  if (la.empty() != lb.empty()) throw ValidationError("give labels for both sides or neither");
  const MatchResult m = match_descriptors(da, db, la, lb);
  if (m.accuracy) std::printf("accuracy,%.6f\n", *m.accuracy);
  std::printf("identity_rate,%.6f\n", identity_rate(m.map));

  std::ostringstream csv;
  csv << "index,match" << (la.empty() ? "" : ",label_a,label_b") << '\n';
  for (std::size_t i = 0; i < m.map.size(); ++i) {
    csv << i << ',' << m.map[i];
    if (!la.empty()) csv << ',' << la[i] << ',' << lb[m.map[i]];
    csv << '\n';
  }
  if (a.csv.empty()) {
    std::printf("%s", csv.str().c_str());
  } else {
    std::ofstream out(a.csv);
    if (!out) throw FormatError("cannot open " + a.csv + " for writing");
    out << csv.str();
  }
  return kOk;
}

struct BenchArgs {
  std::string op = "svc";
  int bandwidth = 8;
  SvcImpl impl = SvcImpl::spectral;
  int repeat = 3;
  int channels = 4;
  std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
  if (a.op != "svc") throw ValidationError("unknown bench op '" + a.op + "'");
  if (a.repeat < 1) throw ValidationError("repeat must be at least 1");
  std::mt19937_64 rng(a.seed);
  const std::vector<Vec3> pts =
      normalize_cloud(toy_sample(ToyShape::cube, 2048, 0.01, rng).points);
  const SphericalGrid f = voxelize(pts, a.bandwidth);
  std::vector<double> coeffs(static_cast<std::size_t>(a.channels) * sh_count(a.bandwidth - 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : coeffs) v = normal(rng);
  const SphericalFilter psi =
      SphericalFilter::from_coefficients(a.bandwidth, a.channels, 1, a.bandwidth - 1, coeffs);

  std::vector<double> ms;
  for (int r = 0; r < a.repeat; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const SphericalGrid out = svc(f, psi, a.impl);
    const auto t1 = std::chrono::steady_clock::now();
    if (out.data().empty()) throw NumericError("empty convolution output");
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  double mean = 0.0;
  for (double v : ms) mean += v / ms.size();
  std::printf("op,impl,bandwidth,channels,repeat,min_ms,median_ms,mean_ms,max_ms\n");
  std::printf("%s,%s,%d,%d,%d,%.3f,%.3f,%.3f,%.3f\n", a.op.c_str(),
              a.impl == SvcImpl::bruteforce ? "brute" : "spectral", a.bandwidth, a.channels,
              a.repeat, sorted.front(), sorted[sorted.size() / 2], mean, sorted.back());
  return kOk;
}

struct ToyArgs {
  std::vector<std::string> classes{"sphere", "cube", "cylinder"};
  std::size_t n = 100;
  std::size_t points = 512;
  PipelineKind pipeline = PipelineKind::sprin;
  int epochs = 200;
  double lr = 0.1;
  int hidden = 0;
  double noise = 0.01;
  double test_fraction = 0.3;
  int bandwidth = 8;
  SamplingMode mode = SamplingMode::daas;
  std::uint64_t seed = 0;
};

int run_toy(const ToyArgs& a) {
  ToyProtocolConfig cfg;
  cfg.classes.clear();
  for (const std::string& c : a.classes) cfg.classes.push_back(parse_toy_shape(c));
  if (cfg.classes.size() < 2) throw ValidationError("need at least two classes");
  cfg.n_per_class = a.n;
  cfg.n_points = a.points;
  cfg.pipeline = a.pipeline;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.head.hidden = a.hidden;
  cfg.noise = a.noise;
  cfg.test_fraction = a.test_fraction;
  cfg.prin.bandwidth = a.bandwidth;
  cfg.prin.mode = a.mode;
  cfg.seed = a.seed;
  const ToyProtocolResult r = run_toy_protocol(cfg);
  std::printf("metric,value\n");
  std::printf("train_clouds,%zu\ntest_clouds,%zu\n", r.n_train, r.n_test);
  std::printf("final_loss,%.6f\n", r.loss.empty() ? 0.0 : r.loss.back());
  std::printf("train_accuracy,%.6f\n", r.train_accuracy);
  std::printf("nr_accuracy,%.6f\nar_accuracy,%.6f\ngap,%.6f\n", r.nr_accuracy, r.ar_accuracy,
              r.nr_accuracy - r.ar_accuracy);
  return kOk;
}

struct FpsArgs {
  std::string in;
  std::size_t m = 16;
  long start = -1;
};

int run_fps(const FpsArgs& a) {
  const std::vector<Vec3> pts = load_points(a.in, false);
  const std::size_t start = a.start < 0 ? canonical_start(pts) : static_cast<std::size_t>(a.start);
  const auto idx = farthest_point_sampling(pts, a.m, start);
  std::printf("rank,index\n");
  for (std::size_t r = 0; r < idx.size(); ++r) std::printf("%zu,%zu\n", r, idx[r]);
  return kOk;
}

struct KnnArgs {
  std::string in;
  int k = 16;
  int d = 1;
  long center = -1;
  std::uint64_t seed = 0;
};

int run_knn(const KnnArgs& a) {
  const std::vector<Vec3> pts = load_points(a.in, false);
  if (a.center >= static_cast<long>(pts.size())) throw ValidationError("center out of range");
  Rng rng(a.seed);
  std::printf("center,rank,neighbor\n");
  const std::size_t first = a.center < 0 ? 0 : static_cast<std::size_t>(a.center);
  const std::size_t last = a.center < 0 ? pts.size() : first + 1;
  for (std::size_t c = first; c < last; ++c) {
    const auto nb = dilated_knn(pts, c, a.k, a.d, rng);
    for (std::size_t r = 0; r < nb.size(); ++r) std::printf("%zu,%zu,%zu\n", c, r, nb[r]);
  }
  return kOk;
}

struct InitArgs {
  PipelineKind pipeline = PipelineKind::sprin;
  std::string out;
  std::uint64_t seed = 0;
  int bandwidth = 8;
  double xi = 1.0 / 32.0;
  SamplingMode mode = SamplingMode::daas;
  bool no_dilation = false;
};

int run_init(const InitArgs& a) {
  TensorArchive archive;
  std::uint64_t hash = 0;
  if (a.pipeline == PipelineKind::prin) {
    PrinConfig cfg;
    cfg.bandwidth = a.bandwidth;
    cfg.xi = a.xi;
    cfg.mode = a.mode;
    archive = prin_to_archive(cfg, init_prin_weights(cfg, a.seed));
    hash = config_hash(cfg);
  } else {
    SprinConfig cfg;
    if (a.no_dilation) cfg = cfg.without_dilation();
    archive = sprin_to_archive(cfg, init_sprin_weights(cfg, a.seed));
    hash = config_hash(cfg);
  }
  write_archive(a.out, archive);
  std::printf("tensors,%zu\nconfig_hash,%016llx\n", archive.size(),
              static_cast<unsigned long long>(hash));
  return kOk;
}

struct SynthArgs {
  std::string shape = "cube";
  std::string out;
  std::size_t points = 512;
  double noise = 0.01;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  std::mt19937_64 rng(a.seed);
  ToyCloud c = toy_sample(parse_toy_shape(a.shape), a.points, a.noise, rng);
  Cloud cloud{normalize_cloud(c.points), c.parts};
  write_cloud(a.out, cloud);
  std::printf("points,%zu\n", cloud.points.size());
  return kOk;
}

struct RotateArgs {
  std::string in, out;
  std::uint64_t seed = 0;
  int z_steps = 0;
  int bandwidth = 8;
};

int run_rotate(const RotateArgs& a) {
  Cloud c = read_cloud(a.in);
  const RotationMatrix q = a.z_steps != 0
                               ? RotationMatrix::about_z(kTwoPi * a.z_steps / (2 * a.bandwidth))
                               : random_rotation(a.seed);
  c.points = rotate_points(q, c.points);
  write_cloud(a.out, c);
  const Eigen::Matrix3d& m = q.matrix();
  std::printf("rotation,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", m(0, 0), m(0, 1),
              m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1), m(2, 2));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-wise rotation-invariant features for point clouds"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker thread cap")
      ->envname("ROTALITH_THREADS")
      ->check(CLI::Range(1u, 256u));

  VoxelizeArgs vox;
  auto* c_vox = app.add_subcommand("voxelize", "Spherical-voxel signal of a cloud");
  c_vox->add_option("--in", vox.in, "Input cloud")->required();
  c_vox->add_option("--out", vox.out, "Output archive")->required();
  c_vox->add_option("--bandwidth", vox.bandwidth, "Bandwidth B")->check(CLI::Range(2, 256));
  c_vox->add_option("--xi", vox.xi, "Window half-width")->check(CLI::PositiveNumber);
  c_vox->add_option("--mode", vox.mode, "daas|uniform")
      ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case));
  c_vox->add_option("--csv", vox.csv, "Also dump the grid as CSV");
  c_vox->add_flag("--normalize", vox.normalize, "Center and scale into the unit ball first");

  EquivArgs eq;
  auto* c_eq = app.add_subcommand("equiv-check", "Seeded rotation trials, CSV");
  c_eq->add_option("--pipeline", eq.pipeline, "prin|sprin")
      ->transform(CLI::CheckedTransformer(kPipelines, CLI::ignore_case));
  c_eq->add_option("--bandwidth", eq.bandwidth, "Bandwidth B")->check(CLI::Range(2, 64));
  c_eq->add_option("--trials", eq.trials, "Number of trials")->check(CLI::Range(1, 100000));
  c_eq->add_option("--seed", eq.seed, "Seed");
  c_eq->add_option("--points", eq.points, "Points per cloud")->check(CLI::Range(64, 1 << 20));

  FeaturesArgs feat;
  auto* c_feat = app.add_subcommand("features", "Descriptor archive of a cloud");
  c_feat->add_option("--pipeline", feat.pipeline, "prin|sprin")
      ->transform(CLI::CheckedTransformer(kPipelines, CLI::ignore_case));
  c_feat->add_option("--in", feat.in, "Input cloud")->required();
  c_feat->add_option("--weights", feat.weights, "Weight archive (default: init from --seed)");
  c_feat->add_option("--out", feat.out, "Output archive")->required();
  c_feat->add_option("--seed", feat.seed, "Seed for neighbor draws and default weights");
  c_feat->add_option("--shape-id", feat.shape_id, "Descriptor shape id");
  auto* per_point = c_feat->add_flag("--per-point", "Per-point features (default)");
  auto* global = c_feat->add_flag("--global", feat.global, "Global feature");
  per_point->excludes(global);
  c_feat->add_flag("--normalize", feat.normalize, "Center and scale into the unit ball first");

  MatchArgs match;
  auto* c_match = app.add_subcommand("match", "Nearest-neighbor descriptor matching");
  c_match->add_option("--a", match.a, "Query descriptor archive")->required();
  c_match->add_option("--b", match.b, "Reference descriptor archive")->required();
  c_match->add_option("--labels-a", match.labels_a, "One integer label per line");
  c_match->add_option("--labels-b", match.labels_b, "One integer label per line");
  c_match->add_option("--csv", match.csv, "Write the per-point CSV here instead of stdout");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Wall-time statistics, CSV");
  c_bench->add_option("--op", bench.op, "Operation (svc)");
  c_bench->add_option("--bandwidth", bench.bandwidth, "Bandwidth B")->check(CLI::Range(2, 64));
  c_bench->add_option("--impl", bench.impl, "brute|spectral")
      ->transform(CLI::CheckedTransformer(kImpls, CLI::ignore_case));
  c_bench->add_option("--repeat", bench.repeat, "Repetitions")->check(CLI::Range(1, 10000));
  c_bench->add_option("--channels", bench.channels, "Output channels")->check(CLI::Range(1, 1024));
  c_bench->add_option("--seed", bench.seed, "Seed");

  ToyArgs toy;
  auto* c_toy = app.add_subcommand("toy", "Frozen backbone, trained head: NR vs AR accuracy");
  c_toy->add_option("--classes", toy.classes, "Comma-separated shapes")->delimiter(',');
  c_toy->add_option("--n", toy.n, "Clouds per class")->check(CLI::Range(2, 100000));
  c_toy->add_option("--points", toy.points, "Points per cloud")->check(CLI::Range(64, 1 << 20));
  c_toy->add_option("--pipeline", toy.pipeline, "prin|sprin")
      ->transform(CLI::CheckedTransformer(kPipelines, CLI::ignore_case));
  c_toy->add_option("--epochs", toy.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  c_toy->add_option("--lr", toy.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  c_toy->add_option("--hidden", toy.hidden, "Hidden head width (0: linear)")
      ->check(CLI::NonNegativeNumber);
  c_toy->add_option("--noise", toy.noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  c_toy->add_option("--test-fraction", toy.test_fraction, "Test split fraction");
  c_toy->add_option("--bandwidth", toy.bandwidth, "Bandwidth for prin")->check(CLI::Range(2, 64));
  c_toy->add_option("--mode", toy.mode, "daas|uniform for prin")
      ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case));
  c_toy->add_option("--seed", toy.seed, "Seed");

  FpsArgs fps;
  auto* c_fps = app.add_subcommand("fps", "Farthest point sampling indices");
  c_fps->add_option("--in", fps.in, "Input cloud")->required();
  c_fps->add_option("--m", fps.m, "Sample count")->required()->check(CLI::PositiveNumber);
  c_fps->add_option("--start", fps.start, "Start index (default: farthest from centroid)");

  KnnArgs knn;
  auto* c_knn = app.add_subcommand("knn", "Dilated k-nearest-neighbor indices");
  c_knn->add_option("--in", knn.in, "Input cloud")->required();
  c_knn->add_option("--k", knn.k, "Neighborhood size")->check(CLI::PositiveNumber);
  c_knn->add_option("--d", knn.d, "Dilation")->check(CLI::PositiveNumber);
  c_knn->add_option("--center", knn.center, "Single center index (default: all)");
  c_knn->add_option("--seed", knn.seed, "Seed");

  InitArgs init;
  auto* c_init = app.add_subcommand("init-weights", "Seeded weight archive");
  c_init->add_option("--pipeline", init.pipeline, "prin|sprin")
      ->transform(CLI::CheckedTransformer(kPipelines, CLI::ignore_case));
  c_init->add_option("--out", init.out, "Output archive")->required();
  c_init->add_option("--seed", init.seed, "Seed");
  c_init->add_option("--bandwidth", init.bandwidth, "Bandwidth for prin")->check(CLI::Range(2, 64));
  c_init->add_option("--xi", init.xi, "Window half-width for prin")->check(CLI::PositiveNumber);
  c_init->add_option("--mode", init.mode, "daas|uniform for prin")
      ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case));
  c_init->add_flag("--no-dilation", init.no_dilation, "Set every sparse dilation to 1");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a labelled toy cloud");
  c_synth->add_option("--shape", synth.shape, "sphere|cube|cylinder");
  c_synth->add_option("--out", synth.out, "Output cloud")->required();
  c_synth->add_option("--points", synth.points, "Point count")->check(CLI::Range(1, 1 << 24));
  c_synth->add_option("--noise", synth.noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  c_synth->add_option("--seed", synth.seed, "Seed");

  RotateArgs rot;
  auto* c_rot = app.add_subcommand("rotate", "Rotate a cloud (Haar by seed, or grid z-steps)");
  c_rot->add_option("--in", rot.in, "Input cloud")->required();
  c_rot->add_option("--out", rot.out, "Output cloud")->required();
  c_rot->add_option("--seed", rot.seed, "Seed of the Haar rotation");
  c_rot->add_option("--z-steps", rot.z_steps, "Rotate about z by 2 pi m / 2B instead");
  c_rot->add_option("--bandwidth", rot.bandwidth, "B for --z-steps")->check(CLI::Range(2, 256));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    set_max_threads(threads);
    if (c_vox->parsed()) return run_voxelize(vox);
    if (c_eq->parsed()) return run_equiv(eq);
    if (c_feat->parsed()) return run_features(feat);
    if (c_match->parsed()) return run_match(match);
    if (c_bench->parsed()) return run_bench(bench);
    if (c_toy->parsed()) return run_toy(toy);
    if (c_fps->parsed()) return run_fps(fps);
    if (c_knn->parsed()) return run_knn(knn);
    if (c_init->parsed()) return run_init(init);
    if (c_synth->parsed()) return run_synth(synth);
    if (c_rot->parsed()) return run_rotate(rot);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInput;
  }
  return kUsage;
}
