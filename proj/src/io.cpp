#include "rotalith/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "rotalith/errors.hpp"

namespace rotalith {

namespace {

static_assert(std::endian::native == std::endian::little,
              "archive encoding assumes a little-endian host");

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos > start) out.push_back(line.substr(start, pos - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void value(T v) {
    bytes(&v, sizeof v);
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

  void bytes(void* p, std::size_t n, const char* what) {
    if (n > buf_.size() - pos_) {
      throw FormatError(std::string("archive truncated while reading ") + what);
    }
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T value(const char* what) {
    T v;
    bytes(&v, sizeof v, what);
    return v;
  }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Clouds

Cloud parse_cloud(const std::string& text) {
  Cloud cloud;
  std::vector<int> labels;
  std::size_t arity = 0;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    const auto fields = split_fields(view);
    if (fields.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != 3 && fields.size() != 4) {
      throw FormatError(where + "expected 3 or 4 fields, got " + std::to_string(fields.size()));
    }
    if (arity == 0) {
      arity = fields.size();
    } else if (fields.size() != arity) {
      throw FormatError(where + "mixed arity: " + std::to_string(fields.size()) + " fields after " +
                        std::to_string(arity));
    }
    Vec3 p;
    for (int c = 0; c < 3; ++c) {
      if (!parse_number(fields[c], p[c]) || !std::isfinite(p[c])) {
        throw FormatError(where + "bad coordinate '" + std::string(fields[c]) + "'");
      }
    }
    cloud.points.push_back(p);
    if (arity == 4) {
      int label = 0;
      if (!parse_number(fields[3], label)) {
        throw FormatError(where + "bad label '" + std::string(fields[3]) + "'");
      }
      labels.push_back(label);
    }
  }
  if (cloud.points.empty()) throw FormatError("cloud contains no points");
  if (arity == 4) cloud.labels = std::move(labels);
  return cloud;
}

Cloud read_cloud(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  try {
    return parse_cloud(std::string(bytes.begin(), bytes.end()));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string format_cloud(const Cloud& cloud) {
  if (cloud.labels && cloud.labels->size() != cloud.points.size()) {
    throw ValidationError("label count does not match point count");
  }
  std::ostringstream out;
  out.precision(9);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.labels) out << ' ' << (*cloud.labels)[i];
    out << '\n';
  }
  return out.str();
}

void write_cloud(const std::filesystem::path& path, const Cloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << format_cloud(cloud);
  if (!out) throw FormatError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Archives

std::uint64_t Tensor::size() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

void TensorArchive::add(const std::string& name, Tensor tensor) {
  if (contains(name)) throw ValidationError("duplicate tensor name '" + name + "'");
  if (tensor.dims.size() > 255) throw ValidationError("tensor rank above 255");
  if (tensor.size() != tensor.data.size()) {
    throw ValidationError("tensor '" + name + "' payload does not match its dims");
  }
  names_.push_back(name);
  tensors_.push_back(std::move(tensor));
}

bool TensorArchive::contains(const std::string& name) const {
  for (const std::string& n : names_) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& TensorArchive::get(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return tensors_[i];
  }
  throw FormatError("archive has no tensor '" + name + "'");
}

std::vector<std::uint8_t> encode_archive(const TensorArchive& archive) {
  Writer w;
  w.bytes("RTLH", 4);
  w.value<std::uint32_t>(kArchiveVersion);
  w.value<std::uint32_t>(static_cast<std::uint32_t>(archive.size()));
  for (const std::string& name : archive.names()) {
    const Tensor& t = archive.get(name);
    w.value<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.value<std::uint8_t>(static_cast<std::uint8_t>(t.dims.size()));
    for (std::uint64_t d : t.dims) w.value<std::uint64_t>(d);
    w.bytes(t.data.data(), t.data.size() * sizeof(float));
  }
  return w.take();
}

TensorArchive decode_archive(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, "RTLH", 4) != 0) throw FormatError("not a tensor archive (bad magic)");
  const auto version = r.value<std::uint32_t>("version");
  if (version != kArchiveVersion) {
    throw FormatError("unsupported archive version " + std::to_string(version));
  }
  const auto count = r.value<std::uint32_t>("tensor count");
  TensorArchive archive;
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto name_len = r.value<std::uint32_t>("name length");
    if (name_len > r.remaining()) throw FormatError("archive truncated while reading name");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len, "name");
    if (archive.contains(name)) throw FormatError("duplicate tensor name '" + name + "'");
    Tensor t;
    const auto rank = r.value<std::uint8_t>("rank");
    std::uint64_t total = 1;
    for (int d = 0; d < rank; ++d) {
      const auto dim = r.value<std::uint64_t>("dims");
      t.dims.push_back(dim);
      if (dim != 0 && total > r.remaining() / dim) {
        throw FormatError("archive truncated in payload of '" + name + "'");
      }
      total *= dim;
    }
    if (total > r.remaining() / sizeof(float)) {
      throw FormatError("archive truncated in payload of '" + name + "'");
    }
    t.data.resize(total);
    r.bytes(t.data.data(), total * sizeof(float), "payload");
    archive.add(name, std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last tensor");
  return archive;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  const std::vector<std::uint8_t> bytes = encode_archive(archive);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

TensorArchive read_archive(const std::filesystem::path& path) {
  try {
    return decode_archive(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

Tensor tensor_from_matrix(const Eigen::MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
  }
  return t;
}

Tensor tensor_from_vector(const Eigen::VectorXd& v) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(v.size())};
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data.push_back(static_cast<float>(v[i]));
  return t;
}

Eigen::MatrixXd matrix_from_tensor(const Tensor& t) {
  if (t.dims.size() != 2) throw FormatError("expected a rank-2 tensor");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1]));
  std::size_t idx = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[idx++];
  }
  return m;
}

Eigen::VectorXd vector_from_tensor(const Tensor& t) {
  if (t.dims.size() != 1) throw FormatError("expected a rank-1 tensor");
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.dims[0]));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = t.data[i];
  return v;
}

Tensor tensor_from_grid(const SphericalGrid& g) {
  Tensor t;
  const auto n = static_cast<std::uint64_t>(g.side());
  t.dims = {n, n, n, static_cast<std::uint64_t>(g.channels())};
  t.data.assign(g.data().begin(), g.data().end());
  return t;
}

SphericalGrid grid_from_tensor(const Tensor& t) {
  if (t.dims.size() != 4 || t.dims[0] != t.dims[1] || t.dims[0] != t.dims[2] ||
      t.dims[0] < 4 || t.dims[0] % 2 != 0 || t.dims[3] < 1) {
    throw FormatError("tensor is not a [2B][2B][2B][C] grid");
  }
  SphericalGrid g(static_cast<int>(t.dims[0] / 2), static_cast<int>(t.dims[3]));
  if (t.data.size() != g.data().size()) throw FormatError("grid payload does not match its dims");
  std::copy(t.data.begin(), t.data.end(), g.data().begin());
  return g;
}

void write_grid_csv(const std::filesystem::path& path, const SphericalGrid& g) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.precision(9);
  out << "i,j,k,alpha,beta,h";
  for (int c = 0; c < g.channels(); ++c) out << ",value_" << c;
  out << '\n';
  const int b = g.bandwidth();
  for (int i = 0; i < g.side(); ++i) {
    for (int j = 0; j < g.side(); ++j) {
      for (int k = 0; k < g.side(); ++k) {
        out << i << ',' << j << ',' << k << ',' << grid_alpha(b, i) << ',' << grid_beta(b, j)
            << ',' << grid_h(b, k);
        for (int c = 0; c < g.channels(); ++c) out << ',' << g.at(i, j, k, c);
        out << '\n';
      }
    }
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace rotalith
