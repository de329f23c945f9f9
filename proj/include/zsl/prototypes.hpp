#pragma once

// Semantic class prototypes built from class names, definitions, visualness
// scores and the class hierarchy. Every prototype that leaves
// build_prototype_set() has unit l2-norm.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "zsl/data_io.hpp"
#include "zsl/visualness.hpp"

namespace zsl {

enum class Method {
  Classname,
  ClassnameParent,
  DefAverage,
  DefVisualness,
  DefAttention,
  ClassnameDefAverage,
  ClassnameDefVisualness,
  ClassnameDefVisualnessParent,
};

inline constexpr double kDefaultParentMu = 0.25;

std::string_view method_name(Method m);
/// Accepts the display names ("Classname+Def_visualness+Parent", ...).
Method parse_method(std::string_view name);
const std::vector<Method>& all_methods();

bool method_uses_tau(Method m);
bool method_uses_mu_def(Method m);
bool method_uses_parent(Method m);
bool method_uses_theta(Method m);

struct PrototypeParams {
  std::optional<double> tau;          // softmax temperature, visualness methods
  std::optional<double> mu_def;       // weight of the definition prototype in Classname+Def_* combinations
  double mu_parent = kDefaultParentMu;  // weight of the parent prototype in +Parent methods
  std::optional<Eigen::VectorXd> theta;  // Def_attention scoring vector
};

struct PrototypeMeta {
  std::string method;
  std::optional<double> tau;
  std::optional<double> mu_def;
  std::optional<double> mu_parent;
};

class PrototypeSet {
 public:
  PrototypeSet() = default;
  /// Checks unique ids, matching row count and unit row norms (1e-9).
  PrototypeSet(std::vector<std::string> class_ids, Eigen::MatrixXd vectors, PrototypeMeta meta);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }
  std::size_t size() const noexcept { return class_ids_.size(); }
  const std::vector<std::string>& class_ids() const noexcept { return class_ids_; }
  const Eigen::MatrixXd& vectors() const noexcept { return vectors_; }
  const PrototypeMeta& meta() const noexcept { return meta_; }

  std::optional<std::size_t> index_of(std::string_view class_id) const;
  Eigen::VectorXd vector(std::size_t i) const { return vectors_.row(static_cast<Eigen::Index>(i)).transpose(); }

  /// Rows for the given class ids, in that order. Throws InputError naming
  /// the first unknown id.
  PrototypeSet subset(const std::vector<std::string>& class_ids) const;

 private:
  std::vector<std::string> class_ids_;
  Eigen::MatrixXd vectors_;
  PrototypeMeta meta_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Softmax weights of one class definition, in token order.
struct WeightReport {
  std::string class_id;
  std::vector<std::pair<std::string, double>> weights;
};

/// Definition tokens that have an embedding, with their vectors as rows.
struct EmbeddedDefinition {
  std::vector<std::string> tokens;
  Eigen::MatrixXd vectors;  // tokens.size() x K
};

EmbeddedDefinition embed_definition(const ClassRecord& cls, const EmbeddingTable& emb);

/// Σ_n exp(a_n − max a) w_n / Σ_n exp(a_n − max a) and the weights.
struct SoftmaxAverage {
  Eigen::VectorXd vector;
  Eigen::VectorXd weights;
};
SoftmaxAverage softmax_average(const Eigen::MatrixXd& vectors, const Eigen::VectorXd& scores);

/// Mean over lemmas of the mean of each lemma's embedded words; the "thing"
/// embedding when no lemma has an embedded word. Unnormalized.
Eigen::VectorXd classname_prototype(const ClassRecord& cls, const EmbeddingTable& emb);

/// Mean of the embedded definition tokens, falling back to
/// classname_prototype(). Unnormalized.
Eigen::VectorXd def_average_prototype(const ClassRecord& cls, const EmbeddingTable& emb);

struct WeightedPrototype {
  Eigen::VectorXd vector;               // unnormalized
  std::optional<WeightReport> report;   // empty when the class fell back to its name
};

/// Softmax(v/τ)-weighted mean of the embedded definition tokens.
WeightedPrototype def_weighted_prototype(const ClassRecord& cls, const EmbeddingTable& emb,
                                         const VisualnessTable& vis, double tau);

/// Softmax(θᵀw)-weighted mean of the embedded definition tokens.
WeightedPrototype def_attention_prototype(const ClassRecord& cls, const EmbeddingTable& emb,
                                          const Eigen::VectorXd& theta);

/// Throws ComputeError for a (numerically) zero vector.
Eigen::VectorXd l2_normalized(const Eigen::VectorXd& v);

/// normalize(μ·primary + (1 − μ)·secondary); the endpoints return an input
/// unchanged.
Eigen::VectorXd combine(const Eigen::VectorXd& primary, const Eigen::VectorXd& secondary, double mu);

struct PrototypeBuild {
  PrototypeSet set;
  std::vector<WeightReport> reports;  // catalog order, classes with definition weights only
};

/// Builds a prototype for every catalog class. `vis` is required by the
/// visualness methods.
PrototypeBuild build_prototype_set(const ClassCatalog& catalog, const EmbeddingTable& emb, Method method,
                                   const PrototypeParams& params, const VisualnessTable* vis = nullptr);

/// Packed file (labels = class ids) plus a JSON sidecar next to it holding the
/// meta. Rows are renormalized in double precision on load.
void save_prototype_set(const std::filesystem::path& path, const PrototypeSet& set);
PrototypeSet load_prototype_set(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& packed);

std::string weight_reports_to_csv(const std::vector<WeightReport>& reports);

}  // namespace zsl
