#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "zsl/data_io.hpp"
#include "zsl/errors.hpp"

namespace zsl {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool is_integer(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<float> parse_float(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  float value = 0.0f;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw InputError("embedding dimension must be positive");
}

bool EmbeddingTable::add(std::string token, std::span<const float> values) {
  if (token.empty()) throw InputError("empty embedding token");
  if (dim_ == 0) dim_ = values.size();
  if (values.size() != dim_ || dim_ == 0) {
    throw InputError("embedding for '" + token + "' has " + std::to_string(values.size()) +
                     " values, expected " + std::to_string(dim_));
  }
  if (!std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); })) {
    throw InputError("non-finite embedding value for '" + token + "'");
  }
  if (index_.contains(token)) {
    ++duplicates_;
    return false;
  }
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  values_.insert(values_.end(), values.begin(), values.end());
  return true;
}

std::span<const float> EmbeddingTable::row(std::size_t i) const {
  return {values_.data() + i * dim_, dim_};
}

std::optional<std::span<const float>> EmbeddingTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return row(it->second);
}

std::optional<std::span<const float>> EmbeddingTable::lookup(std::string_view token) const {
  const std::string lower = lowercase(token);
  if (auto hit = find(lower)) return hit;
  if (lower != token) return find(token);
  return std::nullopt;
}

std::optional<Eigen::VectorXd> EmbeddingTable::lookup_vector(std::string_view token) const {
  auto hit = lookup(token);
  if (!hit) return std::nullopt;
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < dim_; ++k) v[static_cast<Eigen::Index>(k)] = (*hit)[k];
  return v;
}

bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
  if (a.dim_ != b.dim_ || a.tokens_ != b.tokens_ || a.values_.size() != b.values_.size()) return false;
  // Bitwise comparison so that -0.0 and 0.0 are distinguished.
  return std::equal(a.values_.begin(), a.values_.end(), b.values_.begin(), [](float x, float y) {
    return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
  });
}

EmbeddingTable parse_embedding_table(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  bool seen_first = false;
  std::vector<float> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (!seen_first) {
      seen_first = true;
      if (fields.size() == 2 && is_integer(fields[0]) && is_integer(fields[1])) continue;
    }
    if (fields.size() < 2) {
      if (table.dim() == 0) throw ParseError(line_no, "expected a token followed by values");
      throw ParseError(line_no, "expected " + std::to_string(table.dim()) + " values, got 0");
    }
    const std::size_t got = fields.size() - 1;
    if (table.dim() != 0 && got != table.dim()) {
      throw ParseError(line_no,
                       "expected " + std::to_string(table.dim()) + " values, got " + std::to_string(got));
    }
    values.clear();
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto v = parse_float(fields[i]);
      if (!v) throw ParseError(line_no, "invalid or non-finite value '" + std::string(fields[i]) + "'");
      values.push_back(*v);
    }
    table.add(std::string(fields[0]), values);
  }
  if (table.empty()) throw InputError("embedding input contains no vectors");
  return table;
}

EmbeddingTable parse_embedding_table(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_embedding_table(in);
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embedding file " + path.string());
  return parse_embedding_table(in);
}

void write_embedding_table(std::ostream& out, const EmbeddingTable& table) {
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.tokens()[i];
    for (float v : table.row(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

std::string write_embedding_table(const EmbeddingTable& table) {
  std::ostringstream out;
  write_embedding_table(out, table);
  return out.str();
}

}  // namespace zsl
