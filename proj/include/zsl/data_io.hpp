#pragma once

// Ingestion and serialization of every external input: word-embedding text
// tables, JSON Lines class catalogs, packed feature files ("ZSF1") and
// per-word image-feature bundle directories.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace zsl {

// ---------------------------------------------------------------------------
// Embedding tables
// ---------------------------------------------------------------------------

/// Token -> K-dimensional vector. Vectors are stored as 32-bit floats in
/// insertion order; all arithmetic on them is done in double by callers.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

  /// Number of duplicate tokens dropped while parsing (first one wins).
  std::size_t duplicates() const noexcept { return duplicates_; }

  /// Appends a token. Returns false (and keeps the existing vector) if the
  /// token is already present. Throws InputError on a dimension mismatch,
  /// an empty token or a non-finite component.
  bool add(std::string token, std::span<const float> values);

  /// Exact, case-sensitive lookup.
  std::optional<std::span<const float>> find(std::string_view token) const;

  /// Lookup used by prototype builders: the lowercased token first, then the
  /// token as given.
  std::optional<std::span<const float>> lookup(std::string_view token) const;

  /// Same as lookup() but widened to double.
  std::optional<Eigen::VectorXd> lookup_vector(std::string_view token) const;

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::span<const float> row(std::size_t i) const;

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b);

 private:
  std::size_t dim_ = 0;
  std::size_t duplicates_ = 0;
  std::vector<std::string> tokens_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parses `token v1 ... vK` lines. An optional first line made of exactly two
/// integers (`count dim`) is skipped as a header.
EmbeddingTable parse_embedding_table(std::istream& in);
EmbeddingTable parse_embedding_table(std::string_view text);
EmbeddingTable load_embedding_table(const std::filesystem::path& path);

/// Writes one `token v1 ... vK` line per entry (no header). Values use the
/// shortest decimal form that reads back to the same float.
void write_embedding_table(std::ostream& out, const EmbeddingTable& table);
std::string write_embedding_table(const EmbeddingTable& table);

// ---------------------------------------------------------------------------
// Class catalogs
// ---------------------------------------------------------------------------

struct ClassRecord {
  std::string class_id;
  std::vector<std::vector<std::string>> lemmas;  // each lemma split into words
  std::string definition;                         // raw text
  std::vector<std::string> definition_tokens;     // tokenize_definition(definition)
  std::optional<std::string> parent_id;
  bool parent_external = false;  // parent_id names a class outside the catalog
};

class ClassCatalog {
 public:
  ClassCatalog() = default;
  /// Validates uniqueness, non-empty lemmas and parent acyclicity.
  explicit ClassCatalog(std::vector<ClassRecord> classes);

  const std::vector<ClassRecord>& classes() const noexcept { return classes_; }
  std::size_t size() const noexcept { return classes_.size(); }

  std::optional<std::size_t> index_of(std::string_view class_id) const;
  const ClassRecord& at(std::size_t i) const { return classes_.at(i); }
  const ClassRecord& get(std::string_view class_id) const;

  /// Index of the in-catalog parent, if any.
  std::optional<std::size_t> parent_index(std::size_t i) const;

 private:
  std::vector<ClassRecord> classes_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One JSON object per line: class_id, lemmas, definition, parent.
ClassCatalog parse_class_catalog(std::istream& in);
ClassCatalog parse_class_catalog(std::string_view text);
ClassCatalog load_class_catalog(const std::filesystem::path& path);

/// Lowercases ASCII letters and splits on every byte that is not a letter,
/// digit or apostrophe. Bytes >= 0x80 count as letters so UTF-8 words stay
/// whole.
std::vector<std::string> tokenize_definition(std::string_view raw);

/// Splits a lemma such as "black_cat" or "new york" on underscores and spaces.
std::vector<std::string> split_lemma(std::string_view lemma);

// ---------------------------------------------------------------------------
// Packed feature files
// ---------------------------------------------------------------------------

/// N x D row-major matrix of 32-bit floats with optional row labels.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> data;          // rows * dim
  std::vector<std::string> labels;  // empty, or one per row
  bool normalized = false;          // every row has unit l2-norm

  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }

  /// Row-major copy widened to double.
  Eigen::MatrixXd to_eigen() const;

  /// Checks the invariants; throws InputError naming the first violation.
  void validate() const;
};

FeatureMatrix make_feature_matrix(const Eigen::MatrixXd& values, std::vector<std::string> labels);

/// Scales every row to unit l2-norm (zero rows are left untouched and the
/// matrix is then not flagged as normalized).
void normalize_rows(FeatureMatrix& m);

FeatureMatrix read_feature_matrix(std::istream& in);
FeatureMatrix read_feature_matrix(std::span<const std::byte> bytes);
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);

std::vector<std::byte> write_feature_matrix(const FeatureMatrix& m);
void write_feature_matrix(std::ostream& out, const FeatureMatrix& m);
void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m);

// ---------------------------------------------------------------------------
// Word image bundles
// ---------------------------------------------------------------------------

struct WordImageBundle {
  std::string token;
  FeatureMatrix features;  // M x D_img, no labels
};

inline constexpr std::string_view kBundleExtension = ".zf";

std::string percent_encode(std::string_view token);
/// Throws InputError on a malformed escape.
std::string percent_decode(std::string_view encoded);

/// Reads every `<percent-encoded-token>.zf` file in `dir`, sorted by file
/// name. Other files are ignored.
std::vector<WordImageBundle> load_word_image_bundles(const std::filesystem::path& dir);

void save_word_image_bundle(const std::filesystem::path& dir, const WordImageBundle& bundle);

}  // namespace zsl
