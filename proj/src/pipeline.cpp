#include "rotalith/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "rotalith/errors.hpp"
#include "rotalith/resample.hpp"

namespace rotalith {

namespace {

void relu_in_place(S2Signal& s) {
  for (double& v : s.data()) v = std::max(v, 0.0);
}

S2Signal correlate(const S2Signal& g, const SphericalFilter& psi, SvcImpl impl) {
  return impl == SvcImpl::bruteforce ? correlate_bruteforce(g, psi) : correlate_spectral(g, psi);
}

std::vector<int> prin_layer_channels(const PrinConfig& cfg) {
  std::vector<int> out{cfg.svc_channels};
  out.insert(out.end(), cfg.group_channels.begin(), cfg.group_channels.end());
  return out;
}

std::vector<DenseLayer> random_dense_stack(int in, const std::vector<int>& widths, Rng& rng) {
  std::vector<DenseLayer> out;
  for (int w : widths) {
    out.push_back(random_dense(in, w, rng));
    in = w;
  }
  return out;
}

MlpFilter random_filter(int in, const std::vector<int>& hidden, int out, Rng& rng) {
  std::vector<int> widths{in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  return MlpFilter::random(widths, rng);
}

SprinLayerCfg capped(SprinLayerCfg layer, std::size_t support, Aggregation aggregation) {
  layer.k = static_cast<int>(std::min<std::size_t>(layer.k, support));
  layer.aggregation = aggregation;
  return layer;
}

FeatureMatrix concat_columns(const FeatureMatrix& a, const FeatureMatrix& b) {
  FeatureMatrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Eigen::VectorXd pooled(const FeatureMatrix& f) {
  Eigen::VectorXd out(2 * f.cols());
  out << f.colwise().maxCoeff().transpose(), f.colwise().mean().transpose();
  return out;
}

// 64-bit FNV-1a.
class Fnv {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) { bytes(&v, sizeof v); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_floats(const std::string& tag, const std::vector<float>& values) {
  Fnv fnv;
  fnv.bytes(tag.data(), tag.size());
  for (float v : values) fnv.add(v);
  return fnv.value();
}

void add_dense(TensorArchive& a, const std::string& prefix, const std::vector<DenseLayer>& layers) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    a.add(prefix + std::to_string(l) + ".weight", tensor_from_matrix(layers[l].weight));
    a.add(prefix + std::to_string(l) + ".bias", tensor_from_vector(layers[l].bias));
  }
}

std::vector<DenseLayer> read_dense(const TensorArchive& a, const std::string& prefix) {
  std::vector<DenseLayer> out;
  for (std::size_t l = 0; a.contains(prefix + std::to_string(l) + ".weight"); ++l) {
    out.push_back({matrix_from_tensor(a.get(prefix + std::to_string(l) + ".weight")),
                   vector_from_tensor(a.get(prefix + std::to_string(l) + ".bias"))});
  }
  return out;
}

void add_filter(TensorArchive& a, const std::string& prefix, const MlpFilter& f) {
  for (std::size_t l = 0; l < f.weights().size(); ++l) {
    a.add(prefix + ".weight" + std::to_string(l), tensor_from_matrix(f.weights()[l]));
    a.add(prefix + ".bias" + std::to_string(l), tensor_from_vector(f.biases()[l]));
  }
}

MlpFilter read_filter(const TensorArchive& a, const std::string& prefix) {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
  for (std::size_t l = 0; a.contains(prefix + ".weight" + std::to_string(l)); ++l) {
    w.push_back(matrix_from_tensor(a.get(prefix + ".weight" + std::to_string(l))));
    b.push_back(vector_from_tensor(a.get(prefix + ".bias" + std::to_string(l))));
  }
  if (w.empty()) throw FormatError("archive has no filter '" + prefix + "'");
  try {
    return MlpFilter(std::move(w), std::move(b));
  } catch (const ValidationError& e) {
    throw FormatError(prefix + ": " + e.what());
  }
}

const Tensor& rank1(const TensorArchive& a, const std::string& name, std::size_t min_size) {
  const Tensor& t = a.get(name);
  if (t.dims.size() != 1 || t.data.size() < min_size) {
    throw FormatError("malformed tensor '" + name + "'");
  }
  return t;
}

int to_int(float v, const char* what) {
  if (!std::isfinite(v) || v < 0.0f || v != std::floor(v)) {
    throw FormatError(std::string("bad value for ") + what);
  }
  return static_cast<int>(v);
}

std::vector<float> prin_config_values(const PrinConfig& cfg) {
  return {static_cast<float>(cfg.bandwidth), static_cast<float>(cfg.xi),
          cfg.mode == SamplingMode::daas ? 0.0f : 1.0f, cfg.shells_as_channels ? 1.0f : 0.0f,
          cfg.impl == SvcImpl::spectral ? 0.0f : 1.0f};
}

std::vector<float> sprin_config_values(const SprinConfig& cfg) {
  std::vector<float> v{static_cast<float>(cfg.channels),
                       cfg.aggregation == Aggregation::mean ? 0.0f : 1.0f};
  for (const SprinStage& s : cfg.encoder) {
    v.push_back(static_cast<float>(s.centers));
    for (const auto& l : s.layers) {
      v.push_back(static_cast<float>(l.k));
      v.push_back(static_cast<float>(l.d));
    }
  }
  for (const auto& stage : cfg.decoder) {
    for (const auto& l : stage) {
      v.push_back(static_cast<float>(l.k));
      v.push_back(static_cast<float>(l.d));
    }
  }
  for (int w : cfg.filter_hidden) v.push_back(static_cast<float>(w));
  for (int w : cfg.global_fc) v.push_back(static_cast<float>(w));
  for (int w : cfg.point_fc) v.push_back(static_cast<float>(w));
  return v;
}

Tensor layer_table(const std::vector<SprinLayerCfg>& layers) {
  Tensor t;
  t.dims = {layers.size(), 2};
  for (const auto& l : layers) {
    t.data.push_back(static_cast<float>(l.k));
    t.data.push_back(static_cast<float>(l.d));
  }
  return t;
}

std::vector<SprinLayerCfg> read_layer_table(const Tensor& t) {
  if (t.dims.size() != 2 || t.dims[1] != 2) throw FormatError("malformed layer table");
  std::vector<SprinLayerCfg> out;
  for (std::uint64_t r = 0; r < t.dims[0]; ++r) {
    out.push_back({to_int(t.data[2 * r], "k"), to_int(t.data[2 * r + 1], "d")});
  }
  return out;
}

std::vector<int> widths_of(const std::vector<DenseLayer>& layers) {
  std::vector<int> out;
  for (const auto& l : layers) out.push_back(static_cast<int>(l.weight.rows()));
  return out;
}

}  // namespace

DenseLayer random_dense(int in, int out, Rng& rng) {
  if (in < 1 || out < 1) throw ValidationError("dense layer widths must be positive");
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / in));
  DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) layer.weight(r, c) = normal(rng);
  }
  return layer;
}

Eigen::MatrixXd apply_dense(const Eigen::MatrixXd& rows, const std::vector<DenseLayer>& layers) {
  Eigen::MatrixXd x = rows;
  for (const DenseLayer& l : layers) {
    if (x.cols() != l.weight.cols()) {
      throw ValidationError("dense layer expects " + std::to_string(l.weight.cols()) +
                            " inputs, got " + std::to_string(x.cols()));
    }
    Eigen::MatrixXd y = x * l.weight.transpose();
    y.rowwise() += l.bias.transpose();
    x = y.cwiseMax(0.0);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Dense pipeline

void PrinConfig::validate() const {
  if (bandwidth < 2) throw ValidationError("bandwidth must be at least 2");
  if (!(xi > 0.0)) throw ValidationError("xi must be positive");
  for (int c : prin_layer_channels(*this)) {
    if (c < 1) throw ValidationError("convolution widths must be positive");
  }
  for (int w : fc_widths) {
    if (w < 1) throw ValidationError("head widths must be positive");
  }
}

PrinWeights init_prin_weights(const PrinConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  PrinWeights w;
  const int degree = cfg.bandwidth - 1;
  int c_in = cfg.input_channels();
  for (int c_out : prin_layer_channels(cfg)) {
    // The extra sqrt(4 pi) makes the degree-0 response unit-gain; degree l
    // then passes with gain 1 / sqrt(2l + 1).
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / c_in));
    std::vector<double> coeffs(static_cast<std::size_t>(c_out) * c_in * sh_count(degree));
    for (double& v : coeffs) v = normal(rng) * std::sqrt(4.0 * kPi);
    w.filters.push_back(
        SphericalFilter::from_coefficients(cfg.bandwidth, c_out, c_in, degree, std::move(coeffs)));
    c_in = c_out;
  }
  w.point_fc = random_dense_stack(c_in, cfg.fc_widths, rng);
  w.global_fc = random_dense_stack(c_in, cfg.fc_widths, rng);
  return w;
}

SphericalGrid prin_voxel_features(std::span<const Vec3> points, const PrinWeights& weights,
                                  const PrinConfig& cfg) {
  cfg.validate();
  const std::vector<int> channels = prin_layer_channels(cfg);
  if (weights.filters.size() != channels.size()) {
    throw ValidationError("weights hold " + std::to_string(weights.filters.size()) +
                          " convolution layers, config expects " +
                          std::to_string(channels.size()));
  }
  int c_in = cfg.input_channels();
  for (std::size_t l = 0; l < channels.size(); ++l) {
    const SphericalFilter& f = weights.filters[l];
    if (f.bandwidth() != cfg.bandwidth || f.c_in() != c_in || f.c_out() != channels[l]) {
      throw ValidationError("convolution layer " + std::to_string(l) +
                            " does not match the configuration");
    }
    c_in = channels[l];
  }

  const SphericalGrid voxels = voxelize(points, cfg.bandwidth, cfg.sampling());
  S2Signal g = cfg.shells_as_channels ? shells_as_channels(voxels)
                                      : gamma_average(adjoint(voxels));
  for (std::size_t l = 0; l < weights.filters.size(); ++l) {
    if (l > 0) relu_in_place(g);
    g = correlate(g, weights.filters[l], cfg.impl);
  }
  return lift_to_grid(g);
}

ForwardResult prin_forward(std::span<const Vec3> points, const PrinWeights& weights,
                           const PrinConfig& cfg) {
  const SphericalGrid grid = prin_voxel_features(points, weights, cfg);
  std::vector<SphericalPoint> sph;
  sph.reserve(points.size());
  for (const Vec3& p : points) sph.push_back(cart_to_spherical(p));

  ForwardResult out;
  out.per_point = apply_dense(trilinear_sample(grid, sph), weights.point_fc);

  // The grid is constant along h, so pooling over the first shell suffices.
  Eigen::RowVectorXd pool = Eigen::RowVectorXd::Constant(grid.channels(), -HUGE_VAL);
  for (int i = 0; i < grid.side(); ++i) {
    for (int j = 0; j < grid.side(); ++j) {
      for (int c = 0; c < grid.channels(); ++c) pool[c] = std::max(pool[c], grid.at(i, j, 0, c));
    }
  }
  out.global = apply_dense(pool, weights.global_fc).row(0).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Sparse pipeline

SprinConfig SprinConfig::without_dilation() const {
  SprinConfig out = *this;
  for (auto& stage : out.encoder) {
    for (auto& l : stage.layers) l.d = 1;
  }
  for (auto& stage : out.decoder) {
    for (auto& l : stage) l.d = 1;
  }
  return out;
}

void SprinConfig::validate() const {
  if (encoder.empty()) throw ValidationError("sparse encoder needs at least one stage");
  if (encoder.front().centers != 0) {
    throw ValidationError("the first encoder stage must keep every point");
  }
  if (!decoder.empty() && decoder.size() + 1 != encoder.size()) {
    throw ValidationError("decoder needs one stage per encoder transition");
  }
  auto check = [](const SprinLayerCfg& l) {
    if (l.k < 1 || l.d < 1) throw ValidationError("sparse layers need k >= 1 and d >= 1");
  };
  for (const auto& s : encoder) {
    if (s.layers.empty()) throw ValidationError("empty encoder stage");
    for (const auto& l : s.layers) check(l);
  }
  for (const auto& s : decoder) {
    if (s.empty()) throw ValidationError("empty decoder stage");
    for (const auto& l : s) check(l);
  }
  if (channels < 1) throw ValidationError("sparse channel width must be positive");
}

SprinWeights init_sprin_weights(const SprinConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const int c = cfg.channels;
  const int inv = RelativeInvariant::kSize;
  SprinWeights w;
  int feat = 0;
  for (const auto& stage : cfg.encoder) {
    std::vector<MlpFilter> filters;
    for (std::size_t l = 0; l < stage.layers.size(); ++l) {
      filters.push_back(random_filter(inv + feat, cfg.filter_hidden, c, rng));
      feat = c;
    }
    w.encoder.push_back(std::move(filters));
  }
  for (const auto& stage : cfg.decoder) {
    std::vector<MlpFilter> filters;
    for (std::size_t l = 0; l < stage.size(); ++l) {
      const int in = l == 1 ? 2 * c : c;  // the second layer sees the skip features
      filters.push_back(random_filter(inv + in, cfg.filter_hidden, c, rng));
    }
    w.decoder.push_back(std::move(filters));
  }
  w.global_fc = random_dense_stack(2 * c, cfg.global_fc, rng);
  w.point_fc = random_dense_stack(c, cfg.point_fc, rng);
  return w;
}

ForwardResult sprin_forward(std::span<const Vec3> points, const SprinWeights& weights,
                            const SprinConfig& cfg, std::uint64_t seed, bool per_point) {
  cfg.validate();
  if (points.empty()) throw ValidationError("empty cloud");
  if (weights.encoder.size() != cfg.encoder.size()) {
    throw ValidationError("weights do not match the encoder configuration");
  }
  for (std::size_t s = 0; s < cfg.encoder.size(); ++s) {
    if (weights.encoder[s].size() != cfg.encoder[s].layers.size()) {
      throw ValidationError("encoder stage " + std::to_string(s) + " weight count mismatch");
    }
  }
  const bool decode = per_point && !cfg.decoder.empty();
  if (decode) {
    if (weights.decoder.size() != cfg.decoder.size()) {
      throw ValidationError("weights do not match the decoder configuration");
    }
    for (std::size_t s = 0; s < cfg.decoder.size(); ++s) {
      if (weights.decoder[s].size() != cfg.decoder[s].size()) {
        throw ValidationError("decoder stage " + std::to_string(s) + " weight count mismatch");
      }
    }
  }

  Rng rng(seed);
  const Vec3 c = centroid(points);

  // Encoder: levels[s] holds the points and features after stage s.
  std::vector<std::vector<Vec3>> level_points;
  std::vector<FeatureMatrix> level_feats;
  std::vector<Vec3> cur_points(points.begin(), points.end());
  FeatureMatrix cur_feats(static_cast<Eigen::Index>(points.size()), 0);
  for (std::size_t s = 0; s < cfg.encoder.size(); ++s) {
    const SprinStage& stage = cfg.encoder[s];
    for (std::size_t l = 0; l < stage.layers.size(); ++l) {
      const MlpFilter& filter = weights.encoder[s][l];
      if (l == 0 && stage.centers > 0) {
        const std::size_t m = std::min(stage.centers, cur_points.size());
        const SprinLayerCfg layer = capped(stage.layers[l], cur_points.size(), cfg.aggregation);
        AbstractionResult r = set_abstraction(cur_points, cur_feats, m, filter, layer, c, rng);
        cur_points = std::move(r.points);
        cur_feats = std::move(r.features);
      } else {
        const SprinLayerCfg layer = capped(stage.layers[l], cur_points.size(), cfg.aggregation);
        cur_feats = correlate_points(cur_points, cur_points, cur_feats, filter, layer, c, rng);
      }
    }
    level_points.push_back(cur_points);
    level_feats.push_back(cur_feats);
  }

  ForwardResult out;
  out.global = apply_dense(pooled(cur_feats).transpose(), weights.global_fc).row(0).transpose();
  if (!decode) return out;

  for (std::size_t s = 0; s < cfg.decoder.size(); ++s) {
    const std::size_t fine = cfg.encoder.size() - 2 - s;
    const auto& fine_points = level_points[fine];
    const auto& stage = cfg.decoder[s];
    for (std::size_t l = 0; l < stage.size(); ++l) {
      const MlpFilter& filter = weights.decoder[s][l];
      if (l == 0) {
        const SprinLayerCfg layer = capped(stage[l], cur_points.size(), cfg.aggregation);
        cur_feats = feature_propagation(fine_points, cur_points, cur_feats, filter, layer, c, rng);
        cur_points = fine_points;
      } else {
        const SprinLayerCfg layer = capped(stage[l], cur_points.size(), cfg.aggregation);
        const FeatureMatrix in =
            l == 1 ? concat_columns(cur_feats, level_feats[fine]) : cur_feats;
        cur_feats = correlate_points(cur_points, cur_points, in, filter, layer, c, rng);
      }
    }
  }
  out.per_point = apply_dense(cur_feats, weights.point_fc);
  return out;
}

double relative_deviation(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError("feature shapes differ");
  }
  const double diff = (a - b).norm();
  const double ref = b.norm();
  if (ref == 0.0) return diff == 0.0 ? 0.0 : HUGE_VAL;
  return diff / ref;
}

// ---------------------------------------------------------------------------
// Descriptors and weight files

std::uint64_t config_hash(const PrinConfig& cfg) {
  std::vector<float> v = prin_config_values(cfg);
  for (int c : prin_layer_channels(cfg)) v.push_back(static_cast<float>(c));
  for (int w : cfg.fc_widths) v.push_back(static_cast<float>(w));
  return hash_floats("prin", v);
}

std::uint64_t config_hash(const SprinConfig& cfg) {
  return hash_floats("sprin", sprin_config_values(cfg));
}

TensorArchive prin_to_archive(const PrinConfig& cfg, const PrinWeights& weights) {
  TensorArchive a;
  const std::vector<float> values = prin_config_values(cfg);
  a.add("prin.config", Tensor{{values.size()}, values});
  for (std::size_t l = 0; l < weights.filters.size(); ++l) {
    const SphericalFilter f = weights.filters[l].is_spectral()
                                  ? weights.filters[l]
                                  : weights.filters[l].to_spectral(cfg.bandwidth - 1);
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(f.c_out()), static_cast<std::uint64_t>(f.c_in()),
              static_cast<std::uint64_t>(sh_count(f.degree()))};
    t.data.assign(f.values().begin(), f.values().end());
    a.add("prin.filter" + std::to_string(l), std::move(t));
  }
  add_dense(a, "prin.point_fc", weights.point_fc);
  add_dense(a, "prin.global_fc", weights.global_fc);
  return a;
}

std::pair<PrinConfig, PrinWeights> prin_from_archive(const TensorArchive& a) {
  const Tensor& c = rank1(a, "prin.config", 5);
  PrinConfig cfg;
  cfg.bandwidth = to_int(c.data[0], "bandwidth");
  cfg.xi = c.data[1];
  cfg.mode = c.data[2] == 0.0f ? SamplingMode::daas : SamplingMode::uniform;
  cfg.shells_as_channels = c.data[3] != 0.0f;
  cfg.impl = c.data[4] == 0.0f ? SvcImpl::spectral : SvcImpl::bruteforce;

  PrinWeights w;
  std::vector<int> channels;
  for (std::size_t l = 0; a.contains("prin.filter" + std::to_string(l)); ++l) {
    const Tensor& t = a.get("prin.filter" + std::to_string(l));
    if (t.dims.size() != 3) throw FormatError("malformed filter tensor");
    const int degree = static_cast<int>(std::lround(std::sqrt(static_cast<double>(t.dims[2])))) - 1;
    if (degree < 0 || static_cast<std::uint64_t>(sh_count(degree)) != t.dims[2]) {
      throw FormatError("filter coefficient count is not a square");
    }
    try {
      w.filters.push_back(SphericalFilter::from_coefficients(
          cfg.bandwidth, static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), degree,
          std::vector<double>(t.data.begin(), t.data.end())));
    } catch (const ValidationError& e) {
      throw FormatError(std::string("filter ") + std::to_string(l) + ": " + e.what());
    }
    channels.push_back(static_cast<int>(t.dims[0]));
  }
  if (channels.empty()) throw FormatError("archive has no convolution filters");
  cfg.svc_channels = channels.front();
  cfg.group_channels.assign(channels.begin() + 1, channels.end());
  w.point_fc = read_dense(a, "prin.point_fc");
  w.global_fc = read_dense(a, "prin.global_fc");
  cfg.fc_widths = widths_of(w.point_fc);
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("stored configuration: ") + e.what());
  }
  return {cfg, std::move(w)};
}

TensorArchive sprin_to_archive(const SprinConfig& cfg, const SprinWeights& weights) {
  TensorArchive a;
  a.add("sprin.config", Tensor{{2},
                               {static_cast<float>(cfg.channels),
                                cfg.aggregation == Aggregation::mean ? 0.0f : 1.0f}});
  for (std::size_t s = 0; s < cfg.encoder.size(); ++s) {
    const std::string p = "sprin.encoder" + std::to_string(s);
    a.add(p + ".centers", Tensor{{1}, {static_cast<float>(cfg.encoder[s].centers)}});
    a.add(p + ".layers", layer_table(cfg.encoder[s].layers));
    for (std::size_t l = 0; l < weights.encoder[s].size(); ++l) {
      add_filter(a, p + ".filter" + std::to_string(l), weights.encoder[s][l]);
    }
  }
  for (std::size_t s = 0; s < cfg.decoder.size(); ++s) {
    const std::string p = "sprin.decoder" + std::to_string(s);
    a.add(p + ".layers", layer_table(cfg.decoder[s]));
    for (std::size_t l = 0; l < weights.decoder[s].size(); ++l) {
      add_filter(a, p + ".filter" + std::to_string(l), weights.decoder[s][l]);
    }
  }
  add_dense(a, "sprin.global_fc", weights.global_fc);
  add_dense(a, "sprin.point_fc", weights.point_fc);
  return a;
}

std::pair<SprinConfig, SprinWeights> sprin_from_archive(const TensorArchive& a) {
  const Tensor& c = rank1(a, "sprin.config", 2);
  SprinConfig cfg;
  cfg.channels = to_int(c.data[0], "channels");
  cfg.aggregation = c.data[1] == 0.0f ? Aggregation::mean : Aggregation::max;
  cfg.encoder.clear();
  cfg.decoder.clear();
  SprinWeights w;
  for (std::size_t s = 0; a.contains("sprin.encoder" + std::to_string(s) + ".layers"); ++s) {
    const std::string p = "sprin.encoder" + std::to_string(s);
    SprinStage stage;
    stage.centers = static_cast<std::size_t>(to_int(rank1(a, p + ".centers", 1).data[0], "centers"));
    stage.layers = read_layer_table(a.get(p + ".layers"));
    std::vector<MlpFilter> filters;
    for (std::size_t l = 0; l < stage.layers.size(); ++l) {
      filters.push_back(read_filter(a, p + ".filter" + std::to_string(l)));
    }
    cfg.encoder.push_back(std::move(stage));
    w.encoder.push_back(std::move(filters));
  }
  for (std::size_t s = 0; a.contains("sprin.decoder" + std::to_string(s) + ".layers"); ++s) {
    const std::string p = "sprin.decoder" + std::to_string(s);
    std::vector<SprinLayerCfg> layers = read_layer_table(a.get(p + ".layers"));
    std::vector<MlpFilter> filters;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      filters.push_back(read_filter(a, p + ".filter" + std::to_string(l)));
    }
    cfg.decoder.push_back(std::move(layers));
    w.decoder.push_back(std::move(filters));
  }
  if (w.encoder.empty() || w.encoder.front().empty()) {
    throw FormatError("archive has no sparse encoder");
  }
  const auto& first = w.encoder.front().front().weights();
  cfg.filter_hidden.clear();
  for (std::size_t l = 0; l + 1 < first.size(); ++l) {
    cfg.filter_hidden.push_back(static_cast<int>(first[l].rows()));
  }
  w.global_fc = read_dense(a, "sprin.global_fc");
  w.point_fc = read_dense(a, "sprin.point_fc");
  cfg.global_fc = widths_of(w.global_fc);
  cfg.point_fc = widths_of(w.point_fc);
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("stored configuration: ") + e.what());
  }
  return {cfg, std::move(w)};
}

TensorArchive descriptor_to_archive(const Descriptor& d) {
  TensorArchive a;
  a.add("descriptor.features", tensor_from_matrix(d.features));
  Tensor idx{{d.indices.size()}, {}};
  for (std::size_t i : d.indices) idx.data.push_back(static_cast<float>(i));
  a.add("descriptor.indices", std::move(idx));
  Tensor id{{d.shape_id.size()}, {}};
  for (unsigned char ch : d.shape_id) id.data.push_back(static_cast<float>(ch));
  a.add("descriptor.shape_id", std::move(id));
  // Four 16-bit limbs, each exact in a float.
  Tensor hash{{4}, {}};
  for (int limb = 0; limb < 4; ++limb) {
    hash.data.push_back(static_cast<float>((d.config_hash >> (16 * limb)) & 0xffffu));
  }
  a.add("descriptor.config_hash", std::move(hash));
  return a;
}

Descriptor descriptor_from_archive(const TensorArchive& a) {
  Descriptor d;
  d.features = matrix_from_tensor(a.get("descriptor.features"));
  if (a.contains("descriptor.indices")) {
    for (float v : rank1(a, "descriptor.indices", 0).data) {
      d.indices.push_back(static_cast<std::size_t>(to_int(v, "index")));
    }
  }
  if (a.contains("descriptor.shape_id")) {
    for (float v : rank1(a, "descriptor.shape_id", 0).data) {
      d.shape_id.push_back(static_cast<char>(to_int(v, "shape id")));
    }
  }
  if (a.contains("descriptor.config_hash")) {
    const Tensor& h = rank1(a, "descriptor.config_hash", 4);
    for (int limb = 0; limb < 4; ++limb) {
      d.config_hash |= static_cast<std::uint64_t>(to_int(h.data[limb], "hash")) << (16 * limb);
    }
  }
  return d;
}

}  // namespace rotalith
