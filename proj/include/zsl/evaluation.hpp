#pragma once

// Hyperparameter selection on held-out seen classes and top-k evaluation on
// unseen classes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zsl/attention.hpp"
#include "zsl/data_io.hpp"
#include "zsl/prototypes.hpp"
#include "zsl/ridge.hpp"
#include "zsl/visualness.hpp"

namespace zsl {

struct SplitSpec {
  std::uint64_t seed = 0;
  std::vector<std::string> train_class_ids;  // in input order
  std::vector<std::string> val_class_ids;    // in input order
};

/// Seeded shuffle of the seen classes; the first `holdout` become validation
/// classes. Requires 0 < holdout < number of classes.
SplitSpec split_validation(const std::vector<std::string>& seen_class_ids, std::size_t holdout, std::uint64_t seed);

/// The conventional holdout: 20% of the seen classes (200 of 1000), at least 1.
std::size_t default_holdout(std::size_t seen_classes);

/// Rows of `x` whose label is (or is not) in `class_ids`.
FeatureMatrix select_rows(const FeatureMatrix& x, const std::vector<std::string>& class_ids, bool keep_members = true);

/// Distinct labels of `x` in catalog order.
std::vector<std::string> classes_in(const FeatureMatrix& x, const ClassCatalog& catalog);

struct HyperGrid {
  std::vector<double> lambdas;
  std::vector<double> taus;
  std::vector<double> mus;

  static HyperGrid defaults();
  /// Non-empty, ascending, λ and τ positive, μ in [0, 1].
  void validate() const;
};

struct Hyperparams {
  double lambda = 0.0;
  std::optional<double> tau;
  std::optional<double> mu_def;
  std::optional<double> mu_parent;
};

/// Fraction of samples whose true candidate index is among the first k
/// entries of its ranking.
double topk_accuracy(const std::vector<std::vector<std::size_t>>& rankings, const std::vector<std::size_t>& truth,
                     std::size_t k);

struct CrossValidationConfig {
  Method method = Method::Classname;
  HyperGrid grid = HyperGrid::defaults();
  std::uint64_t seed = 0;
  std::optional<std::size_t> holdout;  // default_holdout() when unset
  double mu_parent = kDefaultParentMu;
  Direction direction = Direction::SemanticToVisual;
  AttentionOptions attention;          // Def_attention only
};

struct GridScore {
  Hyperparams params;
  double top1;
};

struct CrossValidationResult {
  Hyperparams selected;
  std::vector<GridScore> scores;  // grid order
  SplitSpec split;
  RidgeModel model;               // refit on every seen class
  PrototypeSet prototypes;        // every catalog class, selected params
  std::vector<WeightReport> reports;
  std::optional<AttentionModel> attention;
};

/// For every grid point: prototypes for the whole catalog, fit on the
/// training-split samples, top-1 on the validation-split samples against the
/// validation classes only. The best point (ties: smaller λ, smaller τ, μ
/// closer to 0.5) is refit on all seen classes.
CrossValidationResult cross_validate(const FeatureMatrix& x, const ClassCatalog& catalog, const EmbeddingTable& emb,
                                     const VisualnessTable* vis, const CrossValidationConfig& config);

struct ClassAccuracy {
  std::string class_id;
  std::size_t samples;
  double top1;
};

struct EvalReport {
  std::string method;
  std::string direction;
  Hyperparams params;
  std::vector<std::size_t> ks;
  std::vector<double> topk;  // aligned with ks
  std::vector<ClassAccuracy> per_class;  // candidate order, classes with test samples
  std::size_t samples = 0;
};

/// Ranks every test sample against the unseen candidates only. Every test
/// label must be a candidate.
EvalReport evaluate_unseen(const RidgeModel& model, const PrototypeSet& unseen, const FeatureMatrix& x_test,
                           const std::vector<std::size_t>& ks);

std::string report_to_json(const EvalReport& report);
/// Header: method,lambda,tau,mu,top<k>...
std::string report_to_csv(const EvalReport& report);

std::string cv_result_to_json(const CrossValidationResult& result, Method method);

}  // namespace zsl
