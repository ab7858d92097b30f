#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rotalith/pipeline.hpp"

namespace rotalith {

struct MatchResult {
  std::vector<std::size_t> map;      ///< nearest row of b for every row of a
  std::optional<double> accuracy;    ///< fraction with agreeing labels, when given
};

/// Euclidean nearest neighbor in feature space, ties to the lower index.
/// Throws ValidationError on a channel mismatch or an empty side.
MatchResult match_descriptors(const Descriptor& a, const Descriptor& b,
                              std::span<const int> labels_a = {},
                              std::span<const int> labels_b = {});

/// Fraction of rows mapped onto their own index.
double identity_rate(const std::vector<std::size_t>& map);

}  // namespace rotalith
