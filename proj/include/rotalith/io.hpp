#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rotalith/geometry.hpp"
#include "rotalith/grid.hpp"

namespace rotalith {

// ---------------------------------------------------------------------------
// Point clouds: ASCII, one "x y z [label]" per line, '#' starts a comment.

struct Cloud {
  std::vector<Vec3> points;
  std::optional<std::vector<int>> labels;
};

/// Throws FormatError (with the 1-based line number) on malformed lines,
/// mixed arity, or a file without points.
Cloud read_cloud(const std::filesystem::path& path);
Cloud parse_cloud(const std::string& text);

/// Coordinates at 9 significant digits.
void write_cloud(const std::filesystem::path& path, const Cloud& cloud);
std::string format_cloud(const Cloud& cloud);

// ---------------------------------------------------------------------------
// Tensor archives.
//
// Layout, all integers little-endian:
//   "RTLH" | u32 version (1) | u32 count
//   per tensor: u32 name length | name bytes | u8 rank | u64 dims[rank] |
//               f32 payload[prod(dims)]

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::uint64_t size() const;
};

class TensorArchive {
 public:
  /// Throws ValidationError on a duplicate name or a payload that does not
  /// match the dims.
  void add(const std::string& name, Tensor tensor);
  bool contains(const std::string& name) const;
  /// Throws FormatError when the name is missing.
  const Tensor& get(const std::string& name) const;
  /// Names in insertion order.
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

std::vector<std::uint8_t> encode_archive(const TensorArchive& archive);
/// Throws FormatError on bad magic, unknown version, truncation, trailing
/// bytes or duplicate names.
TensorArchive decode_archive(const std::vector<std::uint8_t>& bytes);

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

Tensor tensor_from_matrix(const Eigen::MatrixXd& m);
Tensor tensor_from_vector(const Eigen::VectorXd& v);
/// Rank-2 tensor to a matrix; throws FormatError on another rank.
Eigen::MatrixXd matrix_from_tensor(const Tensor& t);
/// Rank-1 tensor to a vector; throws FormatError on another rank.
Eigen::VectorXd vector_from_tensor(const Tensor& t);

/// [2B][2B][2B][C] tensor.
Tensor tensor_from_grid(const SphericalGrid& g);
SphericalGrid grid_from_tensor(const Tensor& t);

/// One row per voxel: i,j,k,alpha,beta,h,value_0,...
void write_grid_csv(const std::filesystem::path& path, const SphericalGrid& g);

/// Reads a whole file as bytes; throws FormatError when it cannot be opened.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace rotalith
