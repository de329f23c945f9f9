#pragma once

// Closed-form ridge regression between semantic prototypes and visual
// features, in both directions, and nearest-projection ranking.
//
//   semantic -> visual:  Θ = (TᵀT + λN·I_K)⁻¹ TᵀX      (K x D)
//   visual -> semantic:  W = (XᵀX + λN·I_D)⁻¹ XᵀT      (D x K)
//
// T repeats one prototype row per sample, so both TᵀT and TᵀX are
// accumulated class-wise and T is never materialized.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "zsl/data_io.hpp"
#include "zsl/kernels.hpp"
#include "zsl/prototypes.hpp"

namespace zsl {

enum class Direction { SemanticToVisual, VisualToSemantic };

std::string_view direction_name(Direction d);  // "s2v" / "v2s"
Direction parse_direction(std::string_view name);

struct RidgeModel {
  Direction direction = Direction::SemanticToVisual;
  Eigen::MatrixXd weights;  // K x D (s2v) or D x K (v2s)
  double lambda = 0.0;
  std::size_t n_train = 0;
};

/// Class-wise sufficient statistics of a labelled feature matrix.
struct TrainingStats {
  std::vector<std::string> class_ids;    // classes present in the data, first-appearance order
  std::vector<std::size_t> counts;       // samples per class
  Eigen::MatrixXd class_sums;            // C x D, row c = Σ_{i: y_i = c} x_i
  std::vector<std::size_t> sample_class; // per sample, index into class_ids
  double squared_norm = 0.0;             // ‖X‖²_F
  std::size_t n = 0;
  std::size_t dim = 0;
};

TrainingStats training_stats(const FeatureMatrix& x);

/// Prototype rows for stats.class_ids (C x K). Throws InputError naming the
/// first label without a prototype.
Eigen::MatrixXd class_prototype_rows(const TrainingStats& stats, const PrototypeSet& prototypes);

/// Solves A·Z = B for symmetric positive-definite A via Cholesky with one
/// step of iterative refinement. Throws SingularSystemError when A is
/// singular or too badly conditioned.
Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

RidgeModel fit_ridge_s2v(const FeatureMatrix& x, const PrototypeSet& prototypes, double lambda);
/// Same fit from precomputed statistics; `class_rows` is C x K, aligned with
/// stats.class_ids.
RidgeModel fit_ridge_s2v(const TrainingStats& stats, const Eigen::MatrixXd& class_rows, double lambda);

RidgeModel fit_ridge_v2s(const FeatureMatrix& x, const PrototypeSet& prototypes, double lambda);
/// Same fit with XᵀX precomputed by feature_gram().
RidgeModel fit_ridge_v2s(const TrainingStats& stats, const Eigen::MatrixXd& gram, const Eigen::MatrixXd& class_rows,
                         double lambda);

/// XᵀX (D x D), accumulated over row chunks.
Eigen::MatrixXd feature_gram(const FeatureMatrix& x);

/// (1/N)·‖X − TΘ‖²_F + λ‖Θ‖²_F (or the visual-to-semantic analogue),
/// evaluated sample by sample.
double ridge_loss(const RidgeModel& model, const FeatureMatrix& x, const PrototypeSet& prototypes);

struct RankedClass {
  std::string class_id;
  std::size_t index;  // position in the candidate set
  double distance;
};

/// Top-k candidates for one feature vector, nearest first; ties keep the
/// lower candidate index first.
std::vector<RankedClass> predict(const RidgeModel& model, const Eigen::VectorXd& x, const PrototypeSet& candidates,
                                 std::size_t k);

/// Rankings for every row of `x`, computed in parallel.
std::vector<std::vector<kernels::Neighbor>> predict_batch(const RidgeModel& model, const FeatureMatrix& x,
                                                          const PrototypeSet& candidates, std::size_t k);

/// Weights in the packed format plus a JSON sidecar {direction, lambda, n_train}.
void save_ridge_model(const std::filesystem::path& path, const RidgeModel& model);
RidgeModel load_ridge_model(const std::filesystem::path& path);

}  // namespace zsl
