#pragma once

// Synthetic datasets with known generating parameters, shared by the unit
// tests, the acceptance suite and the benchmarks.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "zsl/data_io.hpp"

namespace zsl::testing {

/// Self-deleting scratch directory.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double stddev = 1.0);

/// Every row of `values` widened from float, so the double-precision copy
/// matches what a FeatureMatrix holds.
Eigen::MatrixXd float_rounded(const Eigen::MatrixXd& values);

struct ZslOptions {
  std::size_t seen = 40;
  std::size_t unseen = 10;
  std::size_t k = 32;
  std::size_t d = 64;
  std::size_t per_class = 20;
  double noise = 0.01;  // ‖η‖ <= noise · ‖W₀ᵀs‖
  std::uint64_t seed = 1;
};

/// x = W₀ᵀ s_y + η with s_c the normalized embedding of the class's only
/// lemma word. Class ids "c000", ...; the first `seen` are seen classes.
struct ZslDataset {
  EmbeddingTable emb;
  ClassCatalog catalog;
  std::vector<std::string> seen;
  std::vector<std::string> unseen;
  FeatureMatrix train;  // seen classes
  FeatureMatrix test;   // unseen classes
  Eigen::MatrixXd w0;   // K x D
};

ZslDataset make_zsl_dataset(const ZslOptions& options = {});

struct PlantedOptions {
  std::size_t classes = 30;
  std::size_t k = 16;
  std::size_t d = 24;
  std::size_t fillers_per_class = 4;
  std::size_t filler_vocabulary = 40;
  std::size_t per_class = 10;
  double offset = 3.0;  // shared shift of every visual word along one direction
  double noise = 0.01;
  std::uint64_t seed = 7;
};

/// Each definition holds one planted visual word plus shared filler words.
/// Visual words share an embedding offset and alone determine the class
/// features, so a learned θ should put the most weight on them.
struct PlantedDataset {
  EmbeddingTable emb;
  ClassCatalog catalog;
  FeatureMatrix train;
  std::vector<std::string> planted;  // catalog order
};

PlantedDataset make_planted_dataset(const PlantedOptions& options = {});

/// Random vocabulary, definitions of 2 to 6 random words plus one
/// unembedded word, and Gaussian features with three samples per class.
/// With `empty_first_definition` the first class has no embedded definition
/// word.
struct AttentionProblem {
  EmbeddingTable emb;
  ClassCatalog catalog;
  FeatureMatrix x;
};

AttentionProblem make_attention_problem(std::mt19937_64& rng, std::size_t classes, std::size_t k, Eigen::Index d,
                                        bool empty_first_definition = false);

/// One JSON object per line, as read by load_class_catalog().
std::string catalog_to_jsonl(const ClassCatalog& catalog);

/// Input files for the command-line pipeline.
struct DatasetFiles {
  std::filesystem::path embeddings;  // embeddings.txt
  std::filesystem::path classes;     // classes.jsonl
  std::filesystem::path train;       // train.zf
  std::filesystem::path test;        // test.zf (empty path when there is no test split)
};

DatasetFiles write_dataset_files(const std::filesystem::path& dir, const EmbeddingTable& emb,
                                 const ClassCatalog& catalog, const FeatureMatrix& train,
                                 const FeatureMatrix* test = nullptr);

/// Whole file as a string; empty when missing.
std::string slurp(const std::filesystem::path& path);

}  // namespace zsl::testing
