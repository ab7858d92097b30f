#include "rotalith/matching.hpp"

#include "rotalith/errors.hpp"

namespace rotalith {

MatchResult match_descriptors(const Descriptor& a, const Descriptor& b,
                              std::span<const int> labels_a, std::span<const int> labels_b) {
  const FeatureMatrix& fa = a.features;
  const FeatureMatrix& fb = b.features;
  if (fa.cols() != fb.cols()) {
    throw ValidationError("descriptor channel mismatch: " + std::to_string(fa.cols()) + " vs " +
                          std::to_string(fb.cols()));
  }
  if (fa.rows() == 0 || fb.rows() == 0) throw ValidationError("empty descriptor");
  const bool labelled = !labels_a.empty() || !labels_b.empty();
  if (labelled && (static_cast<Eigen::Index>(labels_a.size()) != fa.rows() ||
                   static_cast<Eigen::Index>(labels_b.size()) != fb.rows())) {
    throw ValidationError("label count does not match descriptor rows");
  }

  // |a - b|^2 = |a|^2 - 2 a.b + |b|^2; |a|^2 does not affect the argmin.
  const Eigen::VectorXd nb = fb.rowwise().squaredNorm();
  MatchResult result;
  result.map.resize(fa.rows());
  constexpr Eigen::Index kBlock = 512;
  for (Eigen::Index start = 0; start < fa.rows(); start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, fa.rows() - start);
    const Eigen::MatrixXd score =
        (-2.0 * fa.middleRows(start, rows) * fb.transpose()).rowwise() + nb.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < score.cols(); ++c) {
        if (score(r, c) < score(r, best)) best = c;
      }
      result.map[start + r] = static_cast<std::size_t>(best);
    }
  }
  if (labelled) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < result.map.size(); ++i) {
      hits += labels_a[i] == labels_b[result.map[i]];
    }
    result.accuracy = static_cast<double>(hits) / static_cast<double>(result.map.size());
  }
  return result;
}

double identity_rate(const std::vector<std::size_t>& map) {
  if (map.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < map.size(); ++i) hits += map[i] == i;
  return static_cast<double>(hits) / static_cast<double>(map.size());
}

}  // namespace rotalith
