#include "zsl/attention.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "text_format.hpp"
#include "zsl/errors.hpp"

namespace zsl {

AttentionObjective::AttentionObjective(const FeatureMatrix& x, const ClassCatalog& catalog, const EmbeddingTable& emb,
                                       double lambda)
    : stats_(training_stats(x)), k_(emb.dim()), lambda_(lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be a finite number >= 0");
  if (stats_.n == 0) throw InputError("cannot train attention on an empty training set");
  terms_.reserve(stats_.class_ids.size());
  for (const auto& id : stats_.class_ids) {
    auto idx = catalog.index_of(id);
    if (!idx) throw InputError("label '" + id + "' is not in the class catalog");
    const auto& cls = catalog.at(*idx);
    ClassTerm term{embed_definition(cls, emb), {}};
    if (term.definition.tokens.empty()) term.fixed_row = l2_normalized(classname_prototype(cls, emb));
    terms_.push_back(std::move(term));
  }
}

Eigen::MatrixXd AttentionObjective::prototypes(const Eigen::VectorXd& theta) const {
  if (theta.size() != static_cast<Eigen::Index>(k_)) throw InputError("theta has the wrong dimension");
  Eigen::MatrixXd s(static_cast<Eigen::Index>(terms_.size()), static_cast<Eigen::Index>(k_));
  for (std::size_t c = 0; c < terms_.size(); ++c) {
    const auto& t = terms_[c];
    if (t.definition.tokens.empty()) {
      s.row(static_cast<Eigen::Index>(c)) = t.fixed_row.transpose();
    } else {
      const auto avg = softmax_average(t.definition.vectors, t.definition.vectors * theta);
      s.row(static_cast<Eigen::Index>(c)) = l2_normalized(avg.vector).transpose();
    }
  }
  return s;
}

double AttentionObjective::loss(const Eigen::VectorXd& theta) const {
  const Eigen::MatrixXd s = prototypes(theta);
  const RidgeModel model = fit_ridge_s2v(stats_, s, lambda_);
  const Eigen::MatrixXd& w = model.weights;

  // ‖X − TΘ‖² = ‖X‖² − 2 Σ_c g_c·(Θᵀs_c) + Σ_c N_c ‖Θᵀs_c‖²
  const Eigen::MatrixXd projected = s * w;  // row c = (Θᵀ s_c)ᵀ
  double residual = stats_.squared_norm;
  for (Eigen::Index c = 0; c < projected.rows(); ++c) {
    residual += -2.0 * stats_.class_sums.row(c).dot(projected.row(c)) +
                static_cast<double>(stats_.counts[static_cast<std::size_t>(c)]) * projected.row(c).squaredNorm();
  }
  return residual / static_cast<double>(stats_.n) + lambda_ * w.squaredNorm();
}

// With A = TᵀT + λN·I, B = TᵀX and Θ = A⁻¹B the loss is
//   L = (1/N) (‖X‖² − tr(BᵀA⁻¹B)).
// Using d(A⁻¹) = −A⁻¹ dA A⁻¹,  dA = Σ_c N_c (ds_c s_cᵀ + s_c ds_cᵀ),
// dB = Σ_c ds_c g_cᵀ:
//   ∂L/∂s_c = (2/N) Θ (N_c Θᵀ s_c − g_c).
// The chain then runs through s = u/‖u‖, u = Σ_n e_n w_n,
// e = softmax(a), a_n = θᵀ w_n.
AttentionObjective::Evaluation AttentionObjective::evaluate(const Eigen::VectorXd& theta) const {
  if (theta.size() != static_cast<Eigen::Index>(k_)) throw InputError("theta has the wrong dimension");
  const auto num_classes = static_cast<Eigen::Index>(terms_.size());
  const auto k = static_cast<Eigen::Index>(k_);

  Eigen::MatrixXd s(num_classes, k);
  std::vector<Eigen::VectorXd> weights(terms_.size());
  std::vector<double> u_norm(terms_.size(), 1.0);
  for (std::size_t c = 0; c < terms_.size(); ++c) {
    const auto& t = terms_[c];
    if (t.definition.tokens.empty()) {
      s.row(static_cast<Eigen::Index>(c)) = t.fixed_row.transpose();
      continue;
    }
    auto avg = softmax_average(t.definition.vectors, t.definition.vectors * theta);
    u_norm[c] = avg.vector.norm();
    if (!(u_norm[c] > 0.0)) throw ComputeError("zero definition prototype for class '" + stats_.class_ids[c] + "'");
    s.row(static_cast<Eigen::Index>(c)) = (avg.vector / u_norm[c]).transpose();
    weights[c] = std::move(avg.weights);
  }

  const RidgeModel model = fit_ridge_s2v(stats_, s, lambda_);
  const Eigen::MatrixXd& w = model.weights;  // K x D
  const Eigen::MatrixXd projected = s * w;    // C x D

  Eigen::VectorXd counts(num_classes);
  for (Eigen::Index c = 0; c < num_classes; ++c) counts[c] = static_cast<double>(stats_.counts[static_cast<std::size_t>(c)]);

  double residual = stats_.squared_norm;
  for (Eigen::Index c = 0; c < num_classes; ++c) {
    residual += -2.0 * stats_.class_sums.row(c).dot(projected.row(c)) + counts[c] * projected.row(c).squaredNorm();
  }
  const double n = static_cast<double>(stats_.n);
  const double loss = residual / n + lambda_ * w.squaredNorm();

  // Row c: ∂L/∂s_c
  const Eigen::MatrixXd per_class_residual = counts.asDiagonal() * projected - stats_.class_sums;
  const Eigen::MatrixXd grad_s = (2.0 / n) * per_class_residual * w.transpose();

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
  for (std::size_t c = 0; c < terms_.size(); ++c) {
    const auto& t = terms_[c];
    if (t.definition.tokens.empty()) continue;
    const auto ci = static_cast<Eigen::Index>(c);
    const Eigen::VectorXd sc = s.row(ci).transpose();
    const Eigen::VectorXd gs = grad_s.row(ci).transpose();
    const Eigen::VectorXd gu = (gs - sc * sc.dot(gs)) / u_norm[c];
    const Eigen::VectorXd h = t.definition.vectors * gu;
    const Eigen::VectorXd& e = weights[c];
    const Eigen::VectorXd ga = e.cwiseProduct((h.array() - e.dot(h)).matrix());
    grad.noalias() += t.definition.vectors.transpose() * ga;
  }
  return {loss, std::move(grad)};
}

PrototypeBuild attention_forward(const Eigen::VectorXd& theta, const ClassCatalog& catalog, const EmbeddingTable& emb) {
  PrototypeParams params;
  params.theta = theta;
  return build_prototype_set(catalog, emb, Method::DefAttention, params);
}

double attention_loss(const Eigen::VectorXd& theta, const FeatureMatrix& x, const ClassCatalog& catalog,
                      const EmbeddingTable& emb, double lambda) {
  return AttentionObjective(x, catalog, emb, lambda).loss(theta);
}

Eigen::VectorXd attention_grad(const Eigen::VectorXd& theta, const FeatureMatrix& x, const ClassCatalog& catalog,
                               const EmbeddingTable& emb, double lambda) {
  return AttentionObjective(x, catalog, emb, lambda).evaluate(theta).gradient;
}

AttentionModel train_attention(const FeatureMatrix& x, const ClassCatalog& catalog, const EmbeddingTable& emb,
                               double lambda, const AttentionOptions& options) {
  if (options.epochs == 0) throw InputError("epochs must be at least 1");
  const AttentionObjective objective(x, catalog, emb, lambda);
  const auto k = static_cast<Eigen::Index>(objective.dim());

  AttentionModel model;
  model.seed = options.seed;
  model.theta = Eigen::VectorXd::Zero(k);
  if (options.init == ThetaInit::Gaussian) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, options.init_stddev);
    for (Eigen::Index i = 0; i < k; ++i) model.theta[i] = normal(rng);
  }

  auto current = objective.evaluate(model.theta);
  model.training_log.push_back(current.loss);
  double step = 0.0;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    if (!current.gradient.allFinite() || !std::isfinite(current.loss)) {
      throw ComputeError("non-finite gradient at epoch " + std::to_string(epoch));
    }
    const double gnorm = current.gradient.norm();
    if (gnorm == 0.0) {
      model.training_log.push_back(current.loss);
      continue;
    }
    // First trial step moves θ by unit length; afterwards the last accepted
    // step is doubled so that the search can grow again.
    double eta = step > 0.0 ? step : 1.0 / gnorm;
    bool accepted = false;
    Eigen::VectorXd candidate;
    double candidate_loss = 0.0;
    for (std::size_t h = 0; h <= options.max_halvings; ++h, eta *= 0.5) {
      candidate = model.theta - eta * current.gradient;
      try {
        candidate_loss = objective.loss(candidate);
      } catch (const SingularSystemError&) {
        continue;
      }
      if (candidate_loss <= current.loss) {
        accepted = true;
        break;
      }
    }
    if (accepted) {
      model.theta = std::move(candidate);
      current = objective.evaluate(model.theta);
      step = 2.0 * eta;
    } else {
      step = eta;
    }
    model.training_log.push_back(current.loss);
  }
  return model;
}

std::string attention_model_to_json(const AttentionModel& model) {
  nlohmann::json j;
  j["theta"] = std::vector<double>(model.theta.data(), model.theta.data() + model.theta.size());
  j["seed"] = model.seed;
  j["training_log"] = model.training_log;
  return j.dump(2) + "\n";
}

AttentionModel attention_model_from_json(std::string_view text) {
  AttentionModel model;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto theta = j.at("theta").get<std::vector<double>>();
    model.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    model.seed = j.value("seed", std::uint64_t{0});
    model.training_log = j.value("training_log", std::vector<double>{});
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid attention model JSON: ") + e.what());
  }
  if (!model.theta.allFinite()) throw InputError("attention model has non-finite theta");
  return model;
}

void save_attention_model(const std::filesystem::path& path, const AttentionModel& model) {
  detail::write_text_file(path, attention_model_to_json(model));
}

AttentionModel load_attention_model(const std::filesystem::path& path) {
  return attention_model_from_json(detail::read_text_file(path));
}

}  // namespace zsl
