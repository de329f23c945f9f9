#include "zsl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "parallel.hpp"
#include "text_format.hpp"
#include "zsl/errors.hpp"

namespace zsl {

namespace {

void check_sorted(const std::vector<double>& values, const char* name) {
  if (values.empty()) throw InputError(std::string(name) + " grid is empty");
  if (!std::is_sorted(values.begin(), values.end())) throw InputError(std::string(name) + " grid must be ascending");
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json params_json(const Hyperparams& p) {
  nlohmann::json j;
  j["lambda"] = p.lambda;
  j["tau"] = optional_json(p.tau);
  j["mu_def"] = optional_json(p.mu_def);
  j["mu_parent"] = optional_json(p.mu_parent);
  return j;
}

std::string optional_csv(const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); }

PrototypeParams prototype_params(const Hyperparams& h, const std::optional<Eigen::VectorXd>& theta) {
  PrototypeParams p;
  p.tau = h.tau;
  p.mu_def = h.mu_def;
  if (h.mu_parent) p.mu_parent = *h.mu_parent;
  p.theta = theta;
  return p;
}

// Strict "a is preferred over b" for equal top-1.
bool preferred_on_tie(const Hyperparams& a, const Hyperparams& b) {
  if (a.lambda != b.lambda) return a.lambda < b.lambda;
  const double ta = a.tau.value_or(0.0);
  const double tb = b.tau.value_or(0.0);
  if (ta != tb) return ta < tb;
  const double da = std::abs(a.mu_def.value_or(0.5) - 0.5);
  const double db = std::abs(b.mu_def.value_or(0.5) - 0.5);
  if (da != db) return da < db;
  return a.mu_def.value_or(0.0) < b.mu_def.value_or(0.0);
}

struct FitContext {
  const TrainingStats* stats;
  const Eigen::MatrixXd* gram;  // v2s only
  Direction direction;
};

RidgeModel fit_with(const FitContext& ctx, const PrototypeSet& prototypes, double lambda) {
  const Eigen::MatrixXd rows = class_prototype_rows(*ctx.stats, prototypes);
  if (ctx.direction == Direction::SemanticToVisual) return fit_ridge_s2v(*ctx.stats, rows, lambda);
  return fit_ridge_v2s(*ctx.stats, *ctx.gram, rows, lambda);
}

}  // namespace

SplitSpec split_validation(const std::vector<std::string>& seen_class_ids, std::size_t holdout, std::uint64_t seed) {
  if (holdout == 0) throw InputError("validation holdout must be at least 1 class");
  if (holdout >= seen_class_ids.size()) {
    throw InputError("validation holdout " + std::to_string(holdout) + " must be smaller than the " +
                     std::to_string(seen_class_ids.size()) + " seen classes");
  }
  std::vector<std::size_t> order(seen_class_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> is_val(seen_class_ids.size(), false);
  for (std::size_t i = 0; i < holdout; ++i) is_val[order[i]] = true;
  SplitSpec split;
  split.seed = seed;
  for (std::size_t i = 0; i < seen_class_ids.size(); ++i) {
    (is_val[i] ? split.val_class_ids : split.train_class_ids).push_back(seen_class_ids[i]);
  }
  return split;
}

std::size_t default_holdout(std::size_t seen_classes) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(seen_classes))));
}

FeatureMatrix select_rows(const FeatureMatrix& x, const std::vector<std::string>& class_ids, bool keep_members) {
  if (x.labels.size() != x.rows) throw InputError("row selection needs labelled features");
  const std::unordered_set<std::string> wanted(class_ids.begin(), class_ids.end());
  FeatureMatrix out;
  out.dim = x.dim;
  out.normalized = x.normalized;
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (wanted.contains(x.labels[i]) != keep_members) continue;
    const auto r = x.row(i);
    out.data.insert(out.data.end(), r.begin(), r.end());
    out.labels.push_back(x.labels[i]);
    ++out.rows;
  }
  return out;
}

std::vector<std::string> classes_in(const FeatureMatrix& x, const ClassCatalog& catalog) {
  std::unordered_set<std::string> present(x.labels.begin(), x.labels.end());
  std::vector<std::string> out;
  for (const auto& cls : catalog.classes()) {
    if (present.erase(cls.class_id) > 0) out.push_back(cls.class_id);
  }
  if (!present.empty()) {
    std::vector<std::string> missing(present.begin(), present.end());
    std::sort(missing.begin(), missing.end());
    throw InputError("label '" + missing.front() + "' is not in the class catalog");
  }
  return out;
}

HyperGrid HyperGrid::defaults() {
  HyperGrid g;
  g.lambdas = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
  g.taus = {1.0, 2.0, 5.0, 10.0, 20.0};
  for (int i = 0; i <= 10; ++i) g.mus.push_back(i / 10.0);
  return g;
}

void HyperGrid::validate() const {
  check_sorted(lambdas, "lambda");
  check_sorted(taus, "tau");
  check_sorted(mus, "mu");
  if (lambdas.front() <= 0.0) throw InputError("lambda grid values must be positive");
  if (taus.front() <= 0.0) throw InputError("tau grid values must be positive");
  if (mus.front() < 0.0 || mus.back() > 1.0) throw InputError("mu grid values must lie in [0, 1]");
}

double topk_accuracy(const std::vector<std::vector<std::size_t>>& rankings, const std::vector<std::size_t>& truth,
                     std::size_t k) {
  if (k == 0) throw InputError("k must be at least 1");
  if (rankings.size() != truth.size()) throw InputError("rankings and labels have different lengths");
  if (rankings.empty()) throw InputError("no samples to score");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    if (rankings[i].size() < k) throw InputError("ranking shorter than k");
    const auto first = rankings[i].begin();
    if (std::find(first, first + static_cast<std::ptrdiff_t>(k), truth[i]) != first + static_cast<std::ptrdiff_t>(k)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

namespace {

struct Ranked {
  std::vector<std::vector<std::size_t>> rankings;
  std::vector<std::size_t> truth;
};

Ranked rank_samples(const RidgeModel& model, const PrototypeSet& candidates, const FeatureMatrix& x, std::size_t k) {
  if (k > candidates.size()) {
    throw InputError("k = " + std::to_string(k) + " exceeds the " + std::to_string(candidates.size()) +
                     " candidate classes");
  }
  Ranked out;
  out.truth.reserve(x.rows);
  for (const auto& label : x.labels) {
    auto idx = candidates.index_of(label);
    if (!idx) throw InputError("test label '" + label + "' is not among the candidate classes");
    out.truth.push_back(*idx);
  }
  for (auto& neighbors : predict_batch(model, x, candidates, k)) {
    std::vector<std::size_t> r;
    r.reserve(neighbors.size());
    for (const auto& n : neighbors) r.push_back(n.index);
    out.rankings.push_back(std::move(r));
  }
  return out;
}

}  // namespace

CrossValidationResult cross_validate(const FeatureMatrix& x, const ClassCatalog& catalog, const EmbeddingTable& emb,
                                     const VisualnessTable* vis, const CrossValidationConfig& config) {
  config.grid.validate();
  const Method method = config.method;
  const auto seen = classes_in(x, catalog);
  const std::size_t holdout = config.holdout.value_or(default_holdout(seen.size()));

  CrossValidationResult result;
  result.split = split_validation(seen, holdout, config.seed);
  const FeatureMatrix train = select_rows(x, result.split.train_class_ids);
  const FeatureMatrix val = select_rows(x, result.split.val_class_ids);
  for (const auto& label : train.labels) {
    if (std::find(result.split.val_class_ids.begin(), result.split.val_class_ids.end(), label) !=
        result.split.val_class_ids.end()) {
      throw ComputeError("validation class sample leaked into the training split");
    }
  }

  std::vector<Hyperparams> points;
  const std::vector<std::optional<double>> none{std::nullopt};
  std::vector<std::optional<double>> taus = none;
  std::vector<std::optional<double>> mus = none;
  if (method_uses_tau(method)) taus.assign(config.grid.taus.begin(), config.grid.taus.end());
  if (method_uses_mu_def(method)) mus.assign(config.grid.mus.begin(), config.grid.mus.end());
  const std::optional<double> mu_parent =
      method_uses_parent(method) ? std::optional<double>(config.mu_parent) : std::nullopt;
  for (double lambda : config.grid.lambdas) {
    for (const auto& tau : taus) {
      for (const auto& mu : mus) points.push_back({lambda, tau, mu, mu_parent});
    }
  }

  const TrainingStats train_stats = training_stats(train);
  const Eigen::MatrixXd train_gram =
      config.direction == Direction::VisualToSemantic ? feature_gram(train) : Eigen::MatrixXd();
  const FitContext train_ctx{&train_stats, &train_gram, config.direction};

  result.scores.resize(points.size());
  detail::parallel_for(static_cast<std::ptrdiff_t>(points.size()), [&](std::ptrdiff_t i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    std::optional<Eigen::VectorXd> theta;
    if (method_uses_theta(method)) theta = train_attention(train, catalog, emb, p.lambda, config.attention).theta;
    const auto protos = build_prototype_set(catalog, emb, method, prototype_params(p, theta), vis);
    const auto model = fit_with(train_ctx, protos.set, p.lambda);
    const auto candidates = protos.set.subset(result.split.val_class_ids);
    const auto ranked = rank_samples(model, candidates, val, 1);
    result.scores[static_cast<std::size_t>(i)] = {p, topk_accuracy(ranked.rankings, ranked.truth, 1)};
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.scores.size(); ++i) {
    const auto& cand = result.scores[i];
    const auto& cur = result.scores[best];
    if (cand.top1 > cur.top1 || (cand.top1 == cur.top1 && preferred_on_tie(cand.params, cur.params))) best = i;
  }
  result.selected = result.scores[best].params;

  std::optional<Eigen::VectorXd> theta;
  if (method_uses_theta(method)) {
    result.attention = train_attention(x, catalog, emb, result.selected.lambda, config.attention);
    theta = result.attention->theta;
  }
  auto protos = build_prototype_set(catalog, emb, method, prototype_params(result.selected, theta), vis);
  const TrainingStats all_stats = training_stats(x);
  const Eigen::MatrixXd all_gram =
      config.direction == Direction::VisualToSemantic ? feature_gram(x) : Eigen::MatrixXd();
  result.model = fit_with({&all_stats, &all_gram, config.direction}, protos.set, result.selected.lambda);
  result.prototypes = std::move(protos.set);
  result.reports = std::move(protos.reports);
  return result;
}

EvalReport evaluate_unseen(const RidgeModel& model, const PrototypeSet& unseen, const FeatureMatrix& x_test,
                           const std::vector<std::size_t>& ks) {
  if (ks.empty()) throw InputError("at least one k is required");
  if (x_test.labels.size() != x_test.rows || x_test.rows == 0) {
    throw InputError("test features need at least one labelled row");
  }
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  const auto ranked = rank_samples(model, unseen, x_test, kmax);

  EvalReport report;
  report.method = unseen.meta().method;
  report.direction = std::string(direction_name(model.direction));
  report.params.lambda = model.lambda;
  report.params.tau = unseen.meta().tau;
  report.params.mu_def = unseen.meta().mu_def;
  report.params.mu_parent = unseen.meta().mu_parent;
  report.ks = ks;
  report.samples = x_test.rows;
  for (std::size_t k : ks) report.topk.push_back(topk_accuracy(ranked.rankings, ranked.truth, k));

  std::vector<std::size_t> count(unseen.size(), 0);
  std::vector<std::size_t> hit(unseen.size(), 0);
  for (std::size_t i = 0; i < ranked.truth.size(); ++i) {
    ++count[ranked.truth[i]];
    if (ranked.rankings[i].front() == ranked.truth[i]) ++hit[ranked.truth[i]];
  }
  for (std::size_t c = 0; c < unseen.size(); ++c) {
    if (count[c] == 0) continue;
    report.per_class.push_back(
        {unseen.class_ids()[c], count[c], static_cast<double>(hit[c]) / static_cast<double>(count[c])});
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["method"] = report.method;
  j["direction"] = report.direction;
  j["params"] = params_json(report.params);
  j["samples"] = report.samples;
  nlohmann::json topk = nlohmann::json::object();
  for (std::size_t i = 0; i < report.ks.size(); ++i) topk["top" + std::to_string(report.ks[i])] = report.topk[i];
  j["accuracy"] = topk;
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& c : report.per_class) {
    per_class.push_back({{"class_id", c.class_id}, {"samples", c.samples}, {"top1", c.top1}});
  }
  j["per_class"] = per_class;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "method,lambda,tau,mu";
  for (std::size_t k : report.ks) out << ",top" << k;
  out << '\n';
  out << detail::csv_field(report.method) << ',' << detail::format_double(report.params.lambda) << ','
      << optional_csv(report.params.tau) << ',' << optional_csv(report.params.mu_def);
  for (double a : report.topk) out << ',' << detail::format_double(a);
  out << '\n';
  return out.str();
}

std::string cv_result_to_json(const CrossValidationResult& result, Method method) {
  nlohmann::json j = params_json(result.selected);
  j["method"] = std::string(method_name(method));
  j["direction"] = std::string(direction_name(result.model.direction));
  j["seed"] = result.split.seed;
  j["holdout"] = result.split.val_class_ids.size();
  j["train_classes"] = result.split.train_class_ids;
  j["val_classes"] = result.split.val_class_ids;
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& s : result.scores) {
    auto entry = params_json(s.params);
    entry["top1"] = s.top1;
    scores.push_back(std::move(entry));
  }
  j["validation"] = std::move(scores);
  return j.dump(2) + "\n";
}

}  // namespace zsl
