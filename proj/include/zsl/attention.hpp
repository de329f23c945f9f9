#pragma once

// Def_attention: word scores v_n = θᵀw_n, softmax at temperature 1, weighted
// mean of the definition embeddings, l2-normalized. θ is learned by gradient
// descent on the ridge loss, with Θ re-solved in closed form at every step.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "zsl/data_io.hpp"
#include "zsl/prototypes.hpp"
#include "zsl/ridge.hpp"

namespace zsl {

enum class ThetaInit { Zero, Gaussian };

struct AttentionOptions {
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  ThetaInit init = ThetaInit::Zero;
  double init_stddev = 0.01;
  std::size_t max_halvings = 30;
};

struct AttentionModel {
  Eigen::VectorXd theta;
  std::vector<double> training_log;  // [0] is the loss at initialization, then one entry per epoch
  std::uint64_t seed = 0;
};

/// Loss and exact gradient of the closed-form ridge objective as a function
/// of θ, for one training set. Class statistics and embedded definitions are
/// precomputed once.
class AttentionObjective {
 public:
  AttentionObjective(const FeatureMatrix& x, const ClassCatalog& catalog, const EmbeddingTable& emb, double lambda);

  std::size_t dim() const noexcept { return k_; }

  /// Prototype rows (C x K) for the training classes at θ.
  Eigen::MatrixXd prototypes(const Eigen::VectorXd& theta) const;

  double loss(const Eigen::VectorXd& theta) const;

  struct Evaluation {
    double loss;
    Eigen::VectorXd gradient;
  };
  Evaluation evaluate(const Eigen::VectorXd& theta) const;

 private:
  struct ClassTerm {
    EmbeddedDefinition definition;  // empty when the class falls back to its name
    Eigen::VectorXd fixed_row;      // used when the definition is empty
  };

  TrainingStats stats_;
  std::vector<ClassTerm> terms_;
  std::size_t k_ = 0;
  double lambda_ = 0.0;
};

/// Def_attention prototypes for every catalog class.
PrototypeBuild attention_forward(const Eigen::VectorXd& theta, const ClassCatalog& catalog, const EmbeddingTable& emb);

double attention_loss(const Eigen::VectorXd& theta, const FeatureMatrix& x, const ClassCatalog& catalog,
                      const EmbeddingTable& emb, double lambda);

Eigen::VectorXd attention_grad(const Eigen::VectorXd& theta, const FeatureMatrix& x, const ClassCatalog& catalog,
                               const EmbeddingTable& emb, double lambda);

/// Full-batch gradient descent with a backtracking line search; the logged
/// loss never increases.
AttentionModel train_attention(const FeatureMatrix& x, const ClassCatalog& catalog, const EmbeddingTable& emb,
                               double lambda, const AttentionOptions& options = {});

std::string attention_model_to_json(const AttentionModel& model);
AttentionModel attention_model_from_json(std::string_view text);
void save_attention_model(const std::filesystem::path& path, const AttentionModel& model);
AttentionModel load_attention_model(const std::filesystem::path& path);

}  // namespace zsl
