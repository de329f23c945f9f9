#include "zsl/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "text_format.hpp"
#include "zsl/errors.hpp"

namespace zsl {

namespace {

constexpr double kMinReciprocalCondition = 1e-13;
constexpr std::size_t kChunkRows = 4096;

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be a finite number >= 0");
}

Eigen::MatrixXd rows_as_double(const FeatureMatrix& x, std::size_t begin, std::size_t end) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(x.dim));
  for (std::size_t i = begin; i < end; ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < x.dim; ++j) out(static_cast<Eigen::Index>(i - begin), static_cast<Eigen::Index>(j)) = r[j];
  }
  return out;
}

}  // namespace

std::string_view direction_name(Direction d) {
  return d == Direction::SemanticToVisual ? "s2v" : "v2s";
}

Direction parse_direction(std::string_view name) {
  if (name == "s2v") return Direction::SemanticToVisual;
  if (name == "v2s") return Direction::VisualToSemantic;
  throw InputError("unknown direction '" + std::string(name) + "' (expected s2v or v2s)");
}

TrainingStats training_stats(const FeatureMatrix& x) {
  if (x.labels.size() != x.rows) throw InputError("training features need one label per row");
  TrainingStats s;
  s.n = x.rows;
  s.dim = x.dim;
  std::unordered_map<std::string, std::size_t> index;
  s.sample_class.reserve(x.rows);
  for (const auto& label : x.labels) {
    auto [it, inserted] = index.emplace(label, s.class_ids.size());
    if (inserted) s.class_ids.push_back(label);
    s.sample_class.push_back(it->second);
  }
  auto sums = kernels::omp::class_sums(x, s.sample_class, s.class_ids.size());
  s.class_sums = std::move(sums.sums);
  s.counts = std::move(sums.counts);
  for (float v : x.data) s.squared_norm += double(v) * double(v);
  return s;
}

Eigen::MatrixXd class_prototype_rows(const TrainingStats& stats, const PrototypeSet& prototypes) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(stats.class_ids.size()), static_cast<Eigen::Index>(prototypes.dim()));
  for (std::size_t c = 0; c < stats.class_ids.size(); ++c) {
    auto idx = prototypes.index_of(stats.class_ids[c]);
    if (!idx) throw InputError("label '" + stats.class_ids[c] + "' has no prototype");
    rows.row(static_cast<Eigen::Index>(c)) = prototypes.vectors().row(static_cast<Eigen::Index>(*idx));
  }
  return rows;
}

Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kMinReciprocalCondition)) {
    throw SingularSystemError("ridge system is singular or ill-conditioned; use lambda > 0");
  }
  Eigen::MatrixXd z = llt.solve(b);
  const Eigen::MatrixXd residual = b - a * z;
  z += llt.solve(residual);
  if (!z.allFinite()) throw SingularSystemError("ridge solve produced non-finite weights; use lambda > 0");
  return z;
}

RidgeModel fit_ridge_s2v(const TrainingStats& stats, const Eigen::MatrixXd& class_rows, double lambda) {
  check_lambda(lambda);
  if (stats.n == 0) throw InputError("cannot fit on an empty training set");
  Eigen::VectorXd counts(static_cast<Eigen::Index>(stats.counts.size()));
  for (std::size_t c = 0; c < stats.counts.size(); ++c) counts[static_cast<Eigen::Index>(c)] = double(stats.counts[c]);

  // TᵀT = Σ_c N_c s_c s_cᵀ,  TᵀX = Σ_c s_c g_cᵀ
  Eigen::MatrixXd a = class_rows.transpose() * counts.asDiagonal() * class_rows;
  a.diagonal().array() += lambda * static_cast<double>(stats.n);
  const Eigen::MatrixXd b = class_rows.transpose() * stats.class_sums;
  return {Direction::SemanticToVisual, solve_spd(a, b), lambda, stats.n};
}

RidgeModel fit_ridge_s2v(const FeatureMatrix& x, const PrototypeSet& prototypes, double lambda) {
  const auto stats = training_stats(x);
  return fit_ridge_s2v(stats, class_prototype_rows(stats, prototypes), lambda);
}

Eigen::MatrixXd feature_gram(const FeatureMatrix& x) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.dim), static_cast<Eigen::Index>(x.dim));
  for (std::size_t begin = 0; begin < x.rows; begin += kChunkRows) {
    a += kernels::omp::gram(rows_as_double(x, begin, std::min(x.rows, begin + kChunkRows)));
  }
  return a;
}

RidgeModel fit_ridge_v2s(const TrainingStats& stats, const Eigen::MatrixXd& gram, const Eigen::MatrixXd& class_rows,
                         double lambda) {
  check_lambda(lambda);
  if (stats.n == 0) throw InputError("cannot fit on an empty training set");
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += lambda * static_cast<double>(stats.n);
  // XᵀT = Σ_c g_c s_cᵀ
  const Eigen::MatrixXd b = stats.class_sums.transpose() * class_rows;
  return {Direction::VisualToSemantic, solve_spd(a, b), lambda, stats.n};
}

RidgeModel fit_ridge_v2s(const FeatureMatrix& x, const PrototypeSet& prototypes, double lambda) {
  check_lambda(lambda);
  const auto stats = training_stats(x);
  return fit_ridge_v2s(stats, feature_gram(x), class_prototype_rows(stats, prototypes), lambda);
}

double ridge_loss(const RidgeModel& model, const FeatureMatrix& x, const PrototypeSet& prototypes) {
  if (x.labels.size() != x.rows || x.rows == 0) throw InputError("loss needs a non-empty labelled matrix");
  double total = 0.0;
  Eigen::VectorXd xi(static_cast<Eigen::Index>(x.dim));
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto idx = prototypes.index_of(x.labels[i]);
    if (!idx) throw InputError("label '" + x.labels[i] + "' has no prototype");
    const Eigen::VectorXd s = prototypes.vector(*idx);
    for (std::size_t j = 0; j < x.dim; ++j) xi[static_cast<Eigen::Index>(j)] = x.row(i)[j];
    if (model.direction == Direction::SemanticToVisual) {
      total += (xi - model.weights.transpose() * s).squaredNorm();
    } else {
      total += (s - model.weights.transpose() * xi).squaredNorm();
    }
  }
  return total / static_cast<double>(x.rows) + model.lambda * model.weights.squaredNorm();
}

namespace {

void check_dims(const RidgeModel& model, std::size_t feature_dim, const PrototypeSet& candidates) {
  const auto k = static_cast<std::size_t>(model.direction == Direction::SemanticToVisual ? model.weights.rows()
                                                                                         : model.weights.cols());
  const auto d = static_cast<std::size_t>(model.direction == Direction::SemanticToVisual ? model.weights.cols()
                                                                                         : model.weights.rows());
  if (candidates.dim() != k) {
    throw InputError("candidate prototypes have dimension " + std::to_string(candidates.dim()) + ", model expects " +
                     std::to_string(k));
  }
  if (feature_dim != d) {
    throw InputError("features have dimension " + std::to_string(feature_dim) + ", model expects " +
                     std::to_string(d));
  }
  if (candidates.size() == 0) throw InputError("candidate set is empty");
}

}  // namespace

std::vector<RankedClass> predict(const RidgeModel& model, const Eigen::VectorXd& x, const PrototypeSet& candidates,
                                 std::size_t k) {
  if (k == 0) throw InputError("k must be at least 1");
  check_dims(model, static_cast<std::size_t>(x.size()), candidates);
  std::vector<kernels::Neighbor> ranked;
  if (model.direction == Direction::SemanticToVisual) {
    const Eigen::MatrixXd projected = candidates.vectors() * model.weights;  // rows Θᵀ s_c
    ranked = kernels::rank_one(x.transpose(), projected, k);
  } else {
    const Eigen::RowVectorXd q = (model.weights.transpose() * x).transpose();
    ranked = kernels::rank_one(q, candidates.vectors(), k);
  }
  std::vector<RankedClass> out;
  out.reserve(ranked.size());
  for (const auto& n : ranked) out.push_back({candidates.class_ids()[n.index], n.index, n.distance});
  return out;
}

std::vector<std::vector<kernels::Neighbor>> predict_batch(const RidgeModel& model, const FeatureMatrix& x,
                                                          const PrototypeSet& candidates, std::size_t k) {
  if (k == 0) throw InputError("k must be at least 1");
  check_dims(model, x.dim, candidates);
  std::vector<std::vector<kernels::Neighbor>> out;
  out.reserve(x.rows);
  const bool s2v = model.direction == Direction::SemanticToVisual;
  const Eigen::MatrixXd targets = s2v ? Eigen::MatrixXd(candidates.vectors() * model.weights) : candidates.vectors();
  for (std::size_t begin = 0; begin < x.rows; begin += kChunkRows) {
    Eigen::MatrixXd q = rows_as_double(x, begin, std::min(x.rows, begin + kChunkRows));
    if (!s2v) q = q * model.weights;
    auto part = kernels::omp::rank_nearest(q, targets, k);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

void save_ridge_model(const std::filesystem::path& path, const RidgeModel& model) {
  save_feature_matrix(path, make_feature_matrix(model.weights, {}));
  nlohmann::json j;
  j["direction"] = std::string(direction_name(model.direction));
  j["lambda"] = model.lambda;
  j["n_train"] = model.n_train;
  detail::write_text_file(sidecar_path(path), j.dump(2) + "\n");
}

RidgeModel load_ridge_model(const std::filesystem::path& path) {
  RidgeModel model;
  model.weights = load_feature_matrix(path).to_eigen();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_text_file(sidecar_path(path)));
    model.direction = parse_direction(j.at("direction").get<std::string>());
    model.lambda = j.at("lambda").get<double>();
    model.n_train = j.at("n_train").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(sidecar_path(path).string() + ": " + e.what());
  }
  return model;
}

}  // namespace zsl
