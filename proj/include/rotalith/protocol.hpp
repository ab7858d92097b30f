#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rotalith/head.hpp"
#include "rotalith/pipeline.hpp"
#include "rotalith/toy.hpp"

namespace rotalith {

enum class PipelineKind { prin, sprin };

std::string to_string(PipelineKind p);
PipelineKind parse_pipeline(const std::string& name);

/// splitmix64 of (seed, stream): independent seeds for sub-tasks.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct ToyProtocolConfig {
  std::vector<ToyShape> classes{ToyShape::sphere, ToyShape::cube, ToyShape::cylinder};
  std::size_t n_per_class = 100;
  std::size_t n_points = 512;
  double noise = 0.01;
  double test_fraction = 0.3;
  PipelineKind pipeline = PipelineKind::sprin;
  PrinConfig prin;
  SprinConfig sprin;
  HeadConfig head;  ///< n_classes is taken from `classes`
  int epochs = 200;
  double lr = 0.1;
  std::uint64_t seed = 0;
};

struct ToyProtocolResult {
  double train_accuracy = 0.0;
  double nr_accuracy = 0.0;  ///< unrotated test split
  double ar_accuracy = 0.0;  ///< Haar-rotated test split
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<double> loss;
};

/// Frozen backbone, trained head: global features of the unrotated training
/// split train the head, which is then scored on the test split as is and
/// after a Haar rotation of every test cloud.
ToyProtocolResult run_toy_protocol(const ToyProtocolConfig& cfg);

struct EquivarianceRow {
  int trial = 0;
  std::string rotation;
  double max_abs_err = 0.0;
  double mean_abs_err = 0.0;
};

/// Seeded rotation trials on synthetic clouds.
///   sprin: "haar", per-point features of the full stack.
///   prin:  "grid_z", per-point features under a grid z-rotation;
///          "haar_svc", one convolution on a band-limited rotation;
///          "haar_pipeline", per-point features under a Haar rotation.
std::vector<EquivarianceRow> equivariance_trials(PipelineKind pipeline, int bandwidth, int trials,
                                                 std::uint64_t seed, std::size_t n_points = 512);

}  // namespace rotalith
