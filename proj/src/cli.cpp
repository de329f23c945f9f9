#include "zsl/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <unordered_set>

#include <CLI11.hpp>
#include <json.hpp>

#include "text_format.hpp"
#include "zsl/attention.hpp"
#include "zsl/data_io.hpp"
#include "zsl/errors.hpp"
#include "zsl/evaluation.hpp"
#include "zsl/prototypes.hpp"
#include "zsl/ridge.hpp"
#include "zsl/visualness.hpp"

namespace zsl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::optional<std::string> embeddings, classes, features, test_features, visualness, bundles, out;
  std::optional<std::string> model, prototypes, attention_model;
  std::optional<std::string> method, direction, init;
  std::optional<double> tau, mu_def, mu_parent, lambda;
  std::optional<std::vector<std::size_t>> topk;
  std::optional<std::vector<double>> lambdas, taus, mus;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads, holdout, epochs, bins;
  bool report = false;
};

// Every field with its config-file key; flags use the same name with '-'.
template <typename F, typename... Configs>
void for_each_field(F&& f, Configs&... c) {
  f("embeddings", c.embeddings...);
  f("classes", c.classes...);
  f("features", c.features...);
  f("test_features", c.test_features...);
  f("visualness", c.visualness...);
  f("bundles", c.bundles...);
  f("out", c.out...);
  f("model", c.model...);
  f("prototypes", c.prototypes...);
  f("attention_model", c.attention_model...);
  f("method", c.method...);
  f("direction", c.direction...);
  f("init", c.init...);
  f("tau", c.tau...);
  f("mu_def", c.mu_def...);
  f("mu_parent", c.mu_parent...);
  f("lambda", c.lambda...);
  f("topk", c.topk...);
  f("lambdas", c.lambdas...);
  f("taus", c.taus...);
  f("mus", c.mus...);
  f("seed", c.seed...);
  f("threads", c.threads...);
  f("holdout", c.holdout...);
  f("epochs", c.epochs...);
  f("bins", c.bins...);
}

std::string flag_name(std::string_view key) {
  std::string name = "--" + std::string(key);
  std::replace(name.begin(), name.end(), '_', '-');
  return name;
}

RunConfig config_from_json(const fs::path& path) {
  json j;
  try {
    j = json::parse(detail::read_text_file(path));
  } catch (const json::exception& e) {
    throw InputError("invalid config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("config " + path.string() + " must be a JSON object");
  RunConfig c;
  for_each_field([&](const char* key, auto& field) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
      field = it->template get<typename std::remove_reference_t<decltype(field)>::value_type>();
    } catch (const json::exception&) {
      throw InputError("config key '" + std::string(key) + "' has the wrong type");
    }
  }, c);
  if (const auto it = j.find("report"); it != j.end() && it->is_boolean()) c.report = it->get<bool>();
  return c;
}

json config_to_json(RunConfig c, std::string_view command) {
  json j;
  j["command"] = command;
  for_each_field([&](const char* key, auto& field) {
    if (field) j[key] = *field;
  }, c);
  j["report"] = c.report;
  return j;
}

struct Command {
  std::string name;
  CLI::App* app;
};

void add_flags(CLI::App* sub, RunConfig& flags) {
  for_each_field([&](const char* key, auto& field) {
    using T = typename std::remove_reference_t<decltype(field)>::value_type;
    const std::string name = flag_name(key);
    if constexpr (std::is_same_v<T, std::vector<std::size_t>> || std::is_same_v<T, std::vector<double>>) {
      sub->add_option_function<T>(name, [&field](const T& v) { field = v; })->delimiter(',');
    } else {
      sub->add_option_function<T>(name, [&field](const T& v) { field = v; });
    }
  }, flags);
  sub->add_flag("--report", flags.report, "write per-token definition weights as CSV");
}

template <typename T>
const T& require(const std::optional<T>& v, std::string_view key) {
  if (!v) throw InputError("missing required " + flag_name(key));
  return *v;
}

fs::path out_dir(const RunConfig& c) {
  fs::path dir = require(c.out, "out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_config(const fs::path& dir, const RunConfig& c, std::string_view command) {
  detail::write_text_file(dir / "config.json", config_to_json(c, command).dump(2) + "\n");
}

std::optional<VisualnessTable> load_visualness(const RunConfig& c) {
  if (c.visualness) return load_visualness_table(*c.visualness);
  if (c.bundles) return build_visualness_table(load_word_image_bundles(*c.bundles));
  return std::nullopt;
}

// Warns about parameters the method does not read.
void warn_unused(const RunConfig& c, Method m, std::ostream& err) {
  const std::string name(method_name(m));
  if (c.tau && !method_uses_tau(m)) err << "warning: --tau is ignored by " << name << '\n';
  if (c.mu_def && !method_uses_mu_def(m)) err << "warning: --mu-def is ignored by " << name << '\n';
  if (c.mu_parent && !method_uses_parent(m)) err << "warning: --mu-parent is ignored by " << name << '\n';
  if ((c.visualness || c.bundles) && !method_uses_tau(m)) {
    err << "warning: visualness input is ignored by " << name << '\n';
  }
}

PrototypeParams prototype_params(const RunConfig& c) {
  PrototypeParams p;
  p.tau = c.tau;
  p.mu_def = c.mu_def;
  p.mu_parent = c.mu_parent.value_or(kDefaultParentMu);
  return p;
}

AttentionOptions attention_options(const RunConfig& c) {
  AttentionOptions o;
  o.epochs = c.epochs.value_or(o.epochs);
  o.seed = c.seed.value_or(0);
  if (c.init) {
    if (*c.init == "zero") {
      o.init = ThetaInit::Zero;
    } else if (*c.init == "gaussian") {
      o.init = ThetaInit::Gaussian;
    } else {
      throw InputError("--init must be 'zero' or 'gaussian'");
    }
  }
  return o;
}

void write_reports(const fs::path& dir, const RunConfig& c, const std::vector<WeightReport>& reports,
                   std::ostream& out) {
  if (!c.report) return;
  detail::write_text_file(dir / "weights.csv", weight_reports_to_csv(reports));
  out << "wrote " << (dir / "weights.csv").string() << '\n';
}

int cmd_visualness(const RunConfig& c, std::ostream& out) {
  const auto bundles = load_word_image_bundles(require(c.bundles, "bundles"));
  const auto table = build_visualness_table(bundles);
  const auto dir = out_dir(c);
  save_visualness_table(dir / "visualness.json", table);
  detail::write_text_file(dir / "histogram.csv", histogram_to_csv(visualness_histogram(table, c.bins.value_or(20))));
  write_config(dir, c, "visualness");
  out << "wrote " << table.size() << " visualness scores to " << (dir / "visualness.json").string() << '\n';
  return 0;
}

int cmd_build(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(require(c.method, "method"));
  warn_unused(c, method, err);
  const auto emb = load_embedding_table(require(c.embeddings, "embeddings"));
  const auto catalog = load_class_catalog(require(c.classes, "classes"));
  const auto vis = load_visualness(c);
  auto params = prototype_params(c);
  if (method_uses_theta(method)) params.theta = load_attention_model(require(c.attention_model, "attention_model")).theta;
  const auto build = build_prototype_set(catalog, emb, method, params, vis ? &*vis : nullptr);
  const auto dir = out_dir(c);
  save_prototype_set(dir / "prototypes.zf", build.set);
  write_reports(dir, c, build.reports, out);
  write_config(dir, c, "build");
  out << "wrote " << build.set.size() << " " << method_name(method) << " prototypes to "
      << (dir / "prototypes.zf").string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const double lambda = require(c.lambda, "lambda");
  const Direction direction = parse_direction(c.direction.value_or("s2v"));
  const auto x = load_feature_matrix(require(c.features, "features"));
  const auto dir = out_dir(c);

  PrototypeSet prototypes;
  if (c.prototypes) {
    prototypes = load_prototype_set(*c.prototypes);
  } else {
    const Method method = parse_method(require(c.method, "method"));
    warn_unused(c, method, err);
    const auto emb = load_embedding_table(require(c.embeddings, "embeddings"));
    const auto catalog = load_class_catalog(require(c.classes, "classes"));
    const auto vis = load_visualness(c);
    auto params = prototype_params(c);
    if (method_uses_theta(method)) {
      if (c.attention_model) {
        params.theta = load_attention_model(*c.attention_model).theta;
      } else {
        const auto model = train_attention(x, catalog, emb, lambda, attention_options(c));
        save_attention_model(dir / "attention.json", model);
        params.theta = model.theta;
      }
    }
    auto build = build_prototype_set(catalog, emb, method, params, vis ? &*vis : nullptr);
    write_reports(dir, c, build.reports, out);
    prototypes = std::move(build.set);
  }
  const auto model = direction == Direction::SemanticToVisual ? fit_ridge_s2v(x, prototypes, lambda)
                                                              : fit_ridge_v2s(x, prototypes, lambda);
  save_ridge_model(dir / "model.zf", model);
  save_prototype_set(dir / "prototypes.zf", prototypes);
  write_config(dir, c, "train");
  out << "trained " << direction_name(direction) << " model on " << x.rows << " samples, lambda "
      << detail::format_double(lambda) << '\n';
  return 0;
}

std::vector<std::string> candidate_ids(const PrototypeSet& prototypes, const FeatureMatrix& x) {
  const std::unordered_set<std::string> present(x.labels.begin(), x.labels.end());
  std::vector<std::string> ids;
  for (const auto& id : prototypes.class_ids()) {
    if (present.contains(id)) ids.push_back(id);
  }
  for (const auto& label : present) {
    if (!prototypes.index_of(label)) throw InputError("test label '" + label + "' has no prototype");
  }
  return ids;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  const fs::path model_dir = require(c.model, "model");
  const auto model = load_ridge_model(model_dir / "model.zf");
  const auto prototypes = load_prototype_set(c.prototypes ? fs::path(*c.prototypes) : model_dir / "prototypes.zf");
  const auto x = load_feature_matrix(require(c.test_features, "test_features"));
  const auto ks = c.topk.value_or(std::vector<std::size_t>{1, 5, 10});
  const auto unseen = prototypes.subset(candidate_ids(prototypes, x));
  const auto report = evaluate_unseen(model, unseen, x, ks);
  const auto dir = out_dir(c);
  detail::write_text_file(dir / "report.json", report_to_json(report));
  detail::write_text_file(dir / "report.csv", report_to_csv(report));
  write_config(dir, c, "eval");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    out << "top" << ks[i] << " " << detail::format_double(report.topk[i]) << '\n';
  }
  return 0;
}

int cmd_cv(const RunConfig& c, std::ostream& out, std::ostream& err) {
  CrossValidationConfig config;
  config.method = parse_method(require(c.method, "method"));
  if (c.tau) err << "warning: --tau is ignored by cv; use --taus\n";
  if (c.mu_def) err << "warning: --mu-def is ignored by cv; use --mus\n";
  if (c.mu_parent && !method_uses_parent(config.method)) {
    err << "warning: --mu-parent is ignored by " << method_name(config.method) << '\n';
  }
  if (c.lambdas) config.grid.lambdas = *c.lambdas;
  if (c.taus) config.grid.taus = *c.taus;
  if (c.mus) config.grid.mus = *c.mus;
  config.seed = c.seed.value_or(0);
  config.holdout = c.holdout;
  config.mu_parent = c.mu_parent.value_or(kDefaultParentMu);
  config.direction = parse_direction(c.direction.value_or("s2v"));
  config.attention = attention_options(c);

  const auto emb = load_embedding_table(require(c.embeddings, "embeddings"));
  const auto catalog = load_class_catalog(require(c.classes, "classes"));
  const auto x = load_feature_matrix(require(c.features, "features"));
  const auto vis = load_visualness(c);
  if (method_uses_tau(config.method) && !vis) throw InputError("missing required --visualness or --bundles");

  const auto result = cross_validate(x, catalog, emb, vis ? &*vis : nullptr, config);
  const auto dir = out_dir(c);
  detail::write_text_file(dir / "selected.json", cv_result_to_json(result, config.method));
  save_ridge_model(dir / "model.zf", result.model);
  save_prototype_set(dir / "prototypes.zf", result.prototypes);
  if (result.attention) save_attention_model(dir / "attention.json", *result.attention);
  write_reports(dir, c, result.reports, out);
  write_config(dir, c, "cv");
  out << "selected lambda " << detail::format_double(result.selected.lambda);
  if (result.selected.tau) out << " tau " << detail::format_double(*result.selected.tau);
  if (result.selected.mu_def) out << " mu_def " << detail::format_double(*result.selected.mu_def);
  out << '\n';
  return 0;
}

int cmd_attention(const RunConfig& c, std::ostream& out) {
  const double lambda = require(c.lambda, "lambda");
  const auto emb = load_embedding_table(require(c.embeddings, "embeddings"));
  const auto catalog = load_class_catalog(require(c.classes, "classes"));
  const auto x = load_feature_matrix(require(c.features, "features"));
  const auto model = train_attention(x, catalog, emb, lambda, attention_options(c));
  const auto build = attention_forward(model.theta, catalog, emb);
  const auto dir = out_dir(c);
  save_attention_model(dir / "attention.json", model);
  save_prototype_set(dir / "prototypes.zf", build.set);
  write_reports(dir, c, build.reports, out);
  write_config(dir, c, "attention");
  out << "loss " << detail::format_double(model.training_log.front()) << " -> "
      << detail::format_double(model.training_log.back()) << " after " << model.training_log.size() - 1
      << " epochs\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot learning with sentence-based class prototypes", "zsl"};
  app.require_subcommand(1);
  RunConfig flags;
  std::string config_path;
  const std::map<std::string, std::string> commands{
      {"visualness", "score words by the spread of their image features"},
      {"build", "build class prototypes"},
      {"train", "fit a ridge model on seen-class features"},
      {"eval", "top-k accuracy on unseen-class features"},
      {"cv", "select hyperparameters on held-out seen classes and refit"},
      {"attention", "learn Def_attention word scores"},
  };
  std::vector<Command> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_flags(sub, flags);
    sub->add_option("--config", config_path, "JSON file with defaults for any flag");
    subs.push_back({name, sub});
  }

  // CLI11 parses in reverse order.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const auto it = std::find_if(subs.begin(), subs.end(), [](const Command& s) { return s.app->parsed(); });
  const Command& cmd = *it;
  try {
    RunConfig c = config_path.empty() ? RunConfig{} : config_from_json(config_path);
    for_each_field([](const char*, auto& target, const auto& flag) {
      if (flag) target = flag;
    }, c, flags);
    c.report = c.report || flags.report;
    if (c.threads) {
      if (*c.threads == 0) throw InputError("--threads must be at least 1");
      omp_set_num_threads(static_cast<int>(*c.threads));
    }

    if (cmd.name == "visualness") return cmd_visualness(c, out);
    if (cmd.name == "build") return cmd_build(c, out, err);
    if (cmd.name == "train") return cmd_train(c, out, err);
    if (cmd.name == "eval") return cmd_eval(c, out);
    if (cmd.name == "cv") return cmd_cv(c, out, err);
    return cmd_attention(c, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ComputeError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace zsl::cli
