// ZSF1 packed feature format:
//   "ZSF1" | u32 dim | u64 rows | rows*dim f32 (row-major) | u64 n | n bytes labels
// All integers and floats little-endian. Labels are joined with '\n' and the
// block is empty for label-free matrices.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>

#include "zsl/data_io.hpp"
#include "zsl/errors.hpp"

namespace zsl {

namespace {

constexpr char kMagic[4] = {'Z', 'S', 'F', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8;

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xFFu));
  }
}

template <typename T>
T get_le(const std::byte* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(std::to_integer<unsigned>(p[i])) << (8 * i);
  }
  return value;
}

FormatError truncated(const std::string& what) {
  return FormatError(FormatError::Kind::Truncated, "truncated feature file: " + what);
}

}  // namespace

Eigen::MatrixXd FeatureMatrix::to_eigen() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * dim + j];
    }
  }
  return out;
}

void FeatureMatrix::validate() const {
  if (data.size() != rows * dim) throw InputError("feature matrix data size does not match rows x dim");
  if (!labels.empty() && labels.size() != rows) {
    throw InputError("feature matrix has " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (!std::isfinite(data[k])) throw InputError("non-finite feature at row " + std::to_string(k / dim));
  }
  if (normalized) {
    for (std::size_t i = 0; i < rows; ++i) {
      double sq = 0.0;
      for (float v : row(i)) sq += double(v) * double(v);
      if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
        throw InputError("row " + std::to_string(i) + " is flagged normalized but has norm " +
                         std::to_string(std::sqrt(sq)));
      }
    }
  }
}

FeatureMatrix make_feature_matrix(const Eigen::MatrixXd& values, std::vector<std::string> labels) {
  FeatureMatrix m;
  m.rows = static_cast<std::size_t>(values.rows());
  m.dim = static_cast<std::size_t>(values.cols());
  m.data.resize(m.rows * m.dim);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.dim; ++j) {
      m.data[i * m.dim + j] = static_cast<float>(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  m.labels = std::move(labels);
  m.validate();
  return m;
}

void normalize_rows(FeatureMatrix& m) {
  bool all_unit = true;
  for (std::size_t i = 0; i < m.rows; ++i) {
    float* r = m.data.data() + i * m.dim;
    double sq = 0.0;
    for (std::size_t j = 0; j < m.dim; ++j) sq += double(r[j]) * double(r[j]);
    if (sq == 0.0) {
      all_unit = false;
      continue;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t j = 0; j < m.dim; ++j) r[j] = static_cast<float>(r[j] * inv);
  }
  m.normalized = all_unit;
}

FeatureMatrix read_feature_matrix(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::BadMagic, "not a ZSF1 feature file (bad magic)");
  }
  if (bytes.size() < kHeaderBytes) throw truncated("header");

  FeatureMatrix m;
  m.dim = get_le<std::uint32_t>(bytes.data() + 4);
  const auto rows = get_le<std::uint64_t>(bytes.data() + 8);
  m.rows = static_cast<std::size_t>(rows);

  const std::size_t available = bytes.size() - kHeaderBytes;
  if (m.dim != 0 && rows > available / (std::size_t{4} * m.dim)) {
    throw truncated("payload shorter than rows x dim x 4 bytes");
  }
  const std::size_t count = m.rows * m.dim;
  m.data.resize(count);
  const std::byte* p = bytes.data() + kHeaderBytes;
  for (std::size_t k = 0; k < count; ++k, p += 4) {
    const float v = std::bit_cast<float>(get_le<std::uint32_t>(p));
    if (!std::isfinite(v)) {
      throw FormatError(FormatError::Kind::NonFinite, "non-finite value at row " + std::to_string(k / m.dim));
    }
    m.data[k] = v;
  }

  const std::byte* end = bytes.data() + bytes.size();
  if (end - p < 8) throw truncated("missing labels block");
  const auto label_bytes = get_le<std::uint64_t>(p);
  p += 8;
  if (static_cast<std::uint64_t>(end - p) < label_bytes) throw truncated("labels block");
  std::string_view block(reinterpret_cast<const char*>(p), static_cast<std::size_t>(label_bytes));
  p += label_bytes;
  if (p != end) {
    throw FormatError(FormatError::Kind::TrailingBytes,
                      std::to_string(end - p) + " trailing bytes after labels block");
  }

  if (!block.empty()) {
    std::size_t start = 0;
    while (true) {
      const std::size_t nl = block.find('\n', start);
      const auto label = block.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
      if (label.empty()) throw FormatError(FormatError::Kind::BadLabel, "empty label in labels block");
      m.labels.emplace_back(label);
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
    if (m.labels.size() != m.rows) {
      throw FormatError(FormatError::Kind::LabelMismatch, std::to_string(m.labels.size()) + " labels for " +
                                                              std::to_string(m.rows) + " rows");
    }
  }
  return m;
}

FeatureMatrix read_feature_matrix(std::istream& in) {
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_feature_matrix(std::as_bytes(std::span<const char>(raw)));
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open feature file " + path.string());
  try {
    return read_feature_matrix(in);
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::byte> write_feature_matrix(const FeatureMatrix& m) {
  if (m.data.size() != m.rows * m.dim) throw InputError("feature matrix data size does not match rows x dim");
  if (m.dim > std::numeric_limits<std::uint32_t>::max()) throw InputError("feature dimension exceeds u32");
  if (!m.labels.empty() && m.labels.size() != m.rows) {
    throw FormatError(FormatError::Kind::LabelMismatch, "label count does not match row count");
  }
  std::size_t label_bytes = 0;
  for (const auto& l : m.labels) {
    if (l.empty() || l.find('\n') != std::string::npos) {
      throw FormatError(FormatError::Kind::BadLabel, "labels must be non-empty and contain no newline");
    }
    label_bytes += l.size();
  }
  if (!m.labels.empty()) label_bytes += m.labels.size() - 1;

  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + 4 * m.data.size() + 8 + label_bytes);
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_le(out, static_cast<std::uint32_t>(m.dim));
  put_le(out, static_cast<std::uint64_t>(m.rows));
  for (float v : m.data) {
    if (!std::isfinite(v)) throw FormatError(FormatError::Kind::NonFinite, "refusing to write non-finite value");
    put_le(out, std::bit_cast<std::uint32_t>(v));
  }
  put_le(out, static_cast<std::uint64_t>(label_bytes));
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (i > 0) out.push_back(std::byte{'\n'});
    for (char c : m.labels[i]) out.push_back(static_cast<std::byte>(c));
  }
  return out;
}

void write_feature_matrix(std::ostream& out, const FeatureMatrix& m) {
  const auto bytes = write_feature_matrix(m);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  write_feature_matrix(out, m);
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace zsl
