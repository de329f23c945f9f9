#include "zsl/prototypes.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "parallel.hpp"
#include "text_format.hpp"
#include "zsl/errors.hpp"

namespace zsl {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 8> kMethodNames{{
    {Method::Classname, "Classname"},
    {Method::ClassnameParent, "Classname+Parent"},
    {Method::DefAverage, "Def_average"},
    {Method::DefVisualness, "Def_visualness"},
    {Method::DefAttention, "Def_attention"},
    {Method::ClassnameDefAverage, "Classname+Def_average"},
    {Method::ClassnameDefVisualness, "Classname+Def_visualness"},
    {Method::ClassnameDefVisualnessParent, "Classname+Def_visualness+Parent"},
}};

constexpr std::string_view kFallbackWord = "thing";
constexpr double kUnitTolerance = 1e-9;

Eigen::VectorXd to_vector(std::span<const float> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) v[static_cast<Eigen::Index>(k)] = values[k];
  return v;
}

WeightedPrototype weighted_from_scores(const ClassRecord& cls, const EmbeddingTable& emb,
                                       const EmbeddedDefinition& def, const Eigen::VectorXd& scores) {
  if (def.tokens.empty()) return {classname_prototype(cls, emb), std::nullopt};
  auto avg = softmax_average(def.vectors, scores);
  WeightReport report{cls.class_id, {}};
  report.weights.reserve(def.tokens.size());
  for (std::size_t n = 0; n < def.tokens.size(); ++n) {
    report.weights.emplace_back(def.tokens[n], avg.weights[static_cast<Eigen::Index>(n)]);
  }
  return {std::move(avg.vector), std::move(report)};
}

WeightedPrototype uniform_weighted(const ClassRecord& cls, const EmbeddingTable& emb) {
  const auto def = embed_definition(cls, emb);
  return weighted_from_scores(cls, emb, def, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(def.tokens.size())));
}

void require_unit_interval(double mu, const char* name) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw InputError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

std::string_view method_name(Method m) {
  for (const auto& [method, name] : kMethodNames) {
    if (method == m) return name;
  }
  throw InputError("unknown method");
}

Method parse_method(std::string_view name) {
  for (const auto& [method, n] : kMethodNames) {
    if (n == name) return method;
  }
  std::string known;
  for (const auto& [method, n] : kMethodNames) known += (known.empty() ? "" : ", ") + std::string(n);
  throw InputError("unknown method '" + std::string(name) + "' (expected one of: " + known + ")");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const auto& [m, n] : kMethodNames) out.push_back(m);
    return out;
  }();
  return methods;
}

bool method_uses_tau(Method m) {
  return m == Method::DefVisualness || m == Method::ClassnameDefVisualness ||
         m == Method::ClassnameDefVisualnessParent;
}

bool method_uses_mu_def(Method m) {
  return m == Method::ClassnameDefAverage || m == Method::ClassnameDefVisualness ||
         m == Method::ClassnameDefVisualnessParent;
}

bool method_uses_parent(Method m) {
  return m == Method::ClassnameParent || m == Method::ClassnameDefVisualnessParent;
}

bool method_uses_theta(Method m) { return m == Method::DefAttention; }

// ---------------------------------------------------------------------------

PrototypeSet::PrototypeSet(std::vector<std::string> class_ids, Eigen::MatrixXd vectors, PrototypeMeta meta)
    : class_ids_(std::move(class_ids)), vectors_(std::move(vectors)), meta_(std::move(meta)) {
  if (static_cast<Eigen::Index>(class_ids_.size()) != vectors_.rows()) {
    throw InputError("prototype set has " + std::to_string(class_ids_.size()) + " ids for " +
                     std::to_string(vectors_.rows()) + " rows");
  }
  for (std::size_t i = 0; i < class_ids_.size(); ++i) {
    if (!index_.emplace(class_ids_[i], i).second) {
      throw InputError("duplicate class id '" + class_ids_[i] + "' in prototype set");
    }
    const double norm = vectors_.row(static_cast<Eigen::Index>(i)).norm();
    if (!(std::abs(norm - 1.0) <= kUnitTolerance)) {
      throw InputError("prototype of '" + class_ids_[i] + "' is not unit-norm (" + std::to_string(norm) + ")");
    }
  }
}

std::optional<std::size_t> PrototypeSet::index_of(std::string_view class_id) const {
  auto it = index_.find(std::string(class_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

PrototypeSet PrototypeSet::subset(const std::vector<std::string>& class_ids) const {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(class_ids.size()), vectors_.cols());
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    auto idx = index_of(class_ids[i]);
    if (!idx) throw InputError("no prototype for class '" + class_ids[i] + "'");
    rows.row(static_cast<Eigen::Index>(i)) = vectors_.row(static_cast<Eigen::Index>(*idx));
  }
  return PrototypeSet(class_ids, std::move(rows), meta_);
}

// ---------------------------------------------------------------------------

EmbeddedDefinition embed_definition(const ClassRecord& cls, const EmbeddingTable& emb) {
  EmbeddedDefinition out;
  std::vector<std::span<const float>> rows;
  for (const auto& token : cls.definition_tokens) {
    if (auto hit = emb.lookup(token)) {
      out.tokens.push_back(token);
      rows.push_back(*hit);
    }
  }
  out.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(emb.dim()));
  for (std::size_t n = 0; n < rows.size(); ++n) {
    for (std::size_t k = 0; k < emb.dim(); ++k) {
      out.vectors(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = rows[n][k];
    }
  }
  return out;
}

SoftmaxAverage softmax_average(const Eigen::MatrixXd& vectors, const Eigen::VectorXd& scores) {
  if (vectors.rows() == 0 || vectors.rows() != scores.size()) {
    throw InputError("softmax average needs one score per vector");
  }
  const Eigen::VectorXd e = (scores.array() - scores.maxCoeff()).exp().matrix();
  const double z = e.sum();
  // Dividing the weighted sum by Z (rather than weighting by e/Z) makes equal
  // scores reproduce the plain mean bit for bit.
  return {(vectors.transpose() * e) / z, e / z};
}

Eigen::VectorXd classname_prototype(const ClassRecord& cls, const EmbeddingTable& emb) {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(emb.dim()));
  std::size_t lemmas_used = 0;
  for (const auto& lemma : cls.lemmas) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(emb.dim()));
    std::size_t words = 0;
    for (const auto& word : lemma) {
      if (auto hit = emb.lookup(word)) {
        sum += to_vector(*hit);
        ++words;
      }
    }
    if (words == 0) continue;
    total += sum / static_cast<double>(words);
    ++lemmas_used;
  }
  if (lemmas_used > 0) return total / static_cast<double>(lemmas_used);

  auto thing = emb.lookup(kFallbackWord);
  if (!thing) {
    throw InputError("class '" + cls.class_id + "' has no embedded lemma word and the embedding table lacks \"" +
                     std::string(kFallbackWord) + "\"");
  }
  return to_vector(*thing);
}

Eigen::VectorXd def_average_prototype(const ClassRecord& cls, const EmbeddingTable& emb) {
  // Zero scores give unit exponentials, so this is Σ w_n / N.
  return uniform_weighted(cls, emb).vector;
}

WeightedPrototype def_weighted_prototype(const ClassRecord& cls, const EmbeddingTable& emb,
                                         const VisualnessTable& vis, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InputError("temperature tau must be a positive number");
  const auto def = embed_definition(cls, emb);
  Eigen::VectorXd scores(static_cast<Eigen::Index>(def.tokens.size()));
  for (std::size_t n = 0; n < def.tokens.size(); ++n) {
    scores[static_cast<Eigen::Index>(n)] = vis.score(def.tokens[n]) / tau;
  }
  return weighted_from_scores(cls, emb, def, scores);
}

WeightedPrototype def_attention_prototype(const ClassRecord& cls, const EmbeddingTable& emb,
                                          const Eigen::VectorXd& theta) {
  if (theta.size() != static_cast<Eigen::Index>(emb.dim())) {
    throw InputError("theta has " + std::to_string(theta.size()) + " components, embeddings have " +
                     std::to_string(emb.dim()));
  }
  const auto def = embed_definition(cls, emb);
  const Eigen::VectorXd scores = def.vectors * theta;
  return weighted_from_scores(cls, emb, def, scores);
}

Eigen::VectorXd l2_normalized(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ComputeError("cannot normalize a zero or non-finite prototype");
  return v / norm;
}

Eigen::VectorXd combine(const Eigen::VectorXd& primary, const Eigen::VectorXd& secondary, double mu) {
  require_unit_interval(mu, "mu");
  if (primary.size() != secondary.size()) throw InputError("cannot combine prototypes of different dimension");
  if (mu == 1.0) return primary;
  if (mu == 0.0) return secondary;
  const Eigen::VectorXd mixed = mu * primary + (1.0 - mu) * secondary;
  const double scale = mu * primary.norm() + (1.0 - mu) * secondary.norm();
  if (!(mixed.norm() > 1e-12 * scale)) throw ComputeError("combined prototype has zero norm");
  return mixed / mixed.norm();
}

// ---------------------------------------------------------------------------

PrototypeBuild build_prototype_set(const ClassCatalog& catalog, const EmbeddingTable& emb, Method method,
                                   const PrototypeParams& params, const VisualnessTable* vis) {
  if (emb.empty()) throw InputError("embedding table is empty");
  PrototypeMeta meta{std::string(method_name(method)), std::nullopt, std::nullopt, std::nullopt};
  if (method_uses_tau(method)) {
    if (!params.tau) throw InputError(std::string(method_name(method)) + " requires tau");
    if (!(*params.tau > 0.0)) throw InputError("temperature tau must be positive");
    if (vis == nullptr) throw InputError(std::string(method_name(method)) + " requires a visualness table");
    meta.tau = params.tau;
  }
  if (method_uses_mu_def(method)) {
    if (!params.mu_def) throw InputError(std::string(method_name(method)) + " requires mu_def");
    require_unit_interval(*params.mu_def, "mu_def");
    meta.mu_def = params.mu_def;
  }
  if (method_uses_parent(method)) {
    require_unit_interval(params.mu_parent, "mu_parent");
    meta.mu_parent = params.mu_parent;
  }
  if (method_uses_theta(method)) {
    if (!params.theta) throw InputError("Def_attention requires a trained theta");
    if (params.theta->size() != static_cast<Eigen::Index>(emb.dim())) {
      throw InputError("theta dimension does not match the embeddings");
    }
  }

  const std::size_t c = catalog.size();
  const auto k = static_cast<Eigen::Index>(emb.dim());
  Eigen::MatrixXd base(static_cast<Eigen::Index>(c), k);
  std::vector<std::optional<WeightReport>> reports(c);

  detail::parallel_for(static_cast<std::ptrdiff_t>(c), [&](std::ptrdiff_t i) {
    const auto& cls = catalog.at(static_cast<std::size_t>(i));
    Eigen::VectorXd proto;
    switch (method) {
      case Method::Classname:
      case Method::ClassnameParent:
        proto = l2_normalized(classname_prototype(cls, emb));
        break;
      case Method::DefAverage: {
        auto w = uniform_weighted(cls, emb);
        proto = l2_normalized(w.vector);
        reports[static_cast<std::size_t>(i)] = std::move(w.report);
        break;
      }
      case Method::DefVisualness: {
        auto w = def_weighted_prototype(cls, emb, *vis, *params.tau);
        proto = l2_normalized(w.vector);
        reports[static_cast<std::size_t>(i)] = std::move(w.report);
        break;
      }
      case Method::DefAttention: {
        auto w = def_attention_prototype(cls, emb, *params.theta);
        proto = l2_normalized(w.vector);
        reports[static_cast<std::size_t>(i)] = std::move(w.report);
        break;
      }
      case Method::ClassnameDefAverage: {
        auto w = uniform_weighted(cls, emb);
        proto = combine(l2_normalized(w.vector), l2_normalized(classname_prototype(cls, emb)), *params.mu_def);
        reports[static_cast<std::size_t>(i)] = std::move(w.report);
        break;
      }
      case Method::ClassnameDefVisualness:
      case Method::ClassnameDefVisualnessParent: {
        auto w = def_weighted_prototype(cls, emb, *vis, *params.tau);
        proto = combine(l2_normalized(w.vector), l2_normalized(classname_prototype(cls, emb)), *params.mu_def);
        reports[static_cast<std::size_t>(i)] = std::move(w.report);
        break;
      }
    }
    base.row(i) = proto.transpose();
  });

  Eigen::MatrixXd vectors = base;
  if (method_uses_parent(method)) {
    detail::parallel_for(static_cast<std::ptrdiff_t>(c), [&](std::ptrdiff_t i) {
      auto parent = catalog.parent_index(static_cast<std::size_t>(i));
      if (!parent) return;
      vectors.row(i) = combine(base.row(i).transpose(), base.row(static_cast<Eigen::Index>(*parent)).transpose(),
                               1.0 - params.mu_parent)
                           .transpose();
    });
  }

  std::vector<std::string> ids;
  ids.reserve(c);
  for (const auto& cls : catalog.classes()) ids.push_back(cls.class_id);

  PrototypeBuild out{PrototypeSet(std::move(ids), std::move(vectors), std::move(meta)), {}};
  for (auto& r : reports) {
    if (r) out.reports.push_back(std::move(*r));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::filesystem::path sidecar_path(const std::filesystem::path& packed) {
  auto p = packed;
  p.replace_extension(".json");
  return p;
}

void save_prototype_set(const std::filesystem::path& path, const PrototypeSet& set) {
  save_feature_matrix(path, make_feature_matrix(set.vectors(), set.class_ids()));
  nlohmann::json j;
  j["method"] = set.meta().method;
  j["dim"] = set.dim();
  j["classes"] = set.size();
  j["tau"] = set.meta().tau ? nlohmann::json(*set.meta().tau) : nlohmann::json(nullptr);
  j["mu_def"] = set.meta().mu_def ? nlohmann::json(*set.meta().mu_def) : nlohmann::json(nullptr);
  j["mu_parent"] = set.meta().mu_parent ? nlohmann::json(*set.meta().mu_parent) : nlohmann::json(nullptr);
  detail::write_text_file(sidecar_path(path), j.dump(2) + "\n");
}

PrototypeSet load_prototype_set(const std::filesystem::path& path) {
  const auto m = load_feature_matrix(path);
  if (m.labels.size() != m.rows) throw InputError(path.string() + ": prototype file needs class ids as labels");
  PrototypeMeta meta;
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_text_file(side));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(side.string() + ": " + e.what());
    }
    meta.method = j.value("method", "");
    auto opt = [&](const char* key) -> std::optional<double> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      return j[key].get<double>();
    };
    meta.tau = opt("tau");
    meta.mu_def = opt("mu_def");
    meta.mu_parent = opt("mu_parent");
  }
  Eigen::MatrixXd v = m.to_eigen();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double norm = v.row(i).norm();
    if (!(norm > 0.0)) throw InputError(path.string() + ": zero prototype for '" + m.labels[static_cast<std::size_t>(i)] + "'");
    v.row(i) /= norm;
  }
  return PrototypeSet(m.labels, std::move(v), std::move(meta));
}

std::string weight_reports_to_csv(const std::vector<WeightReport>& reports) {
  std::ostringstream out;
  out << "class_id,token,weight\n";
  for (const auto& r : reports) {
    for (const auto& [token, w] : r.weights) {
      out << detail::csv_field(r.class_id) << ',' << detail::csv_field(token) << ',' << detail::format_double(w)
          << '\n';
    }
  }
  return out.str();
}

}  // namespace zsl
