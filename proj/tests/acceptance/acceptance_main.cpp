// Acceptance suite: one line per criterion, nonzero exit on any FAIL.
//
// Criterion 8 reads a full-scale dataset from $ZSL_FULLSCALE_DIR:
//   embeddings.txt  classes.jsonl  train.zf  test.zf  visualness.json
// and is skipped when the variable is unset.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "synthetic.hpp"
#include "zsl/attention.hpp"
#include "zsl/cli.hpp"
#include "zsl/data_io.hpp"
#include "zsl/evaluation.hpp"
#include "zsl/prototypes.hpp"
#include "zsl/ridge.hpp"
#include "zsl/visualness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace zsl;
using testing::gaussian_matrix;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Status::Pass : Status::Fail, detail}; }

std::string sci(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << v;
  return s.str();
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Runs the command line in process; any nonzero exit is an error.
void zsl_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) {
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    throw std::runtime_error("zsl " + joined + "exited " + std::to_string(code) + ": " + err.str());
  }
}

// ---------------------------------------------------------------------------
// 1. Ridge fits against conjugate gradients
// ---------------------------------------------------------------------------

Outcome ridge_oracle() {
  const Stopwatch clock;
  std::mt19937_64 rng(1001);
  const auto grid = HyperGrid::defaults().lambdas;
  std::uniform_int_distribution<Eigen::Index> rows(50, 1000), dims_k(2, 64), dims_d(2, 128), classes(2, 80);
  std::uniform_int_distribution<std::size_t> pick_lambda(0, grid.size() - 1);
  const int instances = 60;
  double worst_residual = 0.0, worst_loss = 0.0;
  for (int trial = 0; trial < instances; ++trial) {
    const Eigen::Index n = rows(rng), k = dims_k(rng), d = dims_d(rng), c = classes(rng);
    const double lambda = grid[pick_lambda(rng)];
    Eigen::MatrixXd s = gaussian_matrix(c, k, rng);
    s.rowwise().normalize();
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < c; ++i) ids.push_back("class" + std::to_string(i));
    std::uniform_int_distribution<Eigen::Index> label(0, c - 1);
    std::vector<std::string> labels;
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back(ids[static_cast<std::size_t>(label(rng))]);
    const auto x = make_feature_matrix(gaussian_matrix(n, d, rng, 2.0), std::move(labels));
    const PrototypeSet protos(ids, s, {});

    const Eigen::MatrixXd t = testing::design_matrix(x, protos);
    const Eigen::MatrixXd xe = x.to_eigen();
    const double shift = lambda * static_cast<double>(n);
    const bool s2v = trial % 2 == 0;
    const auto model = s2v ? fit_ridge_s2v(x, protos, lambda) : fit_ridge_v2s(x, protos, lambda);
    const Eigen::MatrixXd& m = s2v ? t : xe;
    const Eigen::MatrixXd& y = s2v ? xe : t;
    const Eigen::MatrixXd b = m.transpose() * y;
    const Eigen::MatrixXd residual = m.transpose() * (m * model.weights) + shift * model.weights - b;
    worst_residual = std::max(worst_residual, residual.norm() / b.norm());

    const Eigen::MatrixXd oracle = testing::cg_ridge(m, shift, b);
    const double loss = ridge_loss(model, x, protos);
    worst_loss = std::max(worst_loss,
                          testing::relative_error(loss, testing::explicit_ridge_loss(y, m, oracle, lambda), 1.0));
  }
  const double elapsed = clock.seconds();
  return verdict(worst_residual < 1e-10 && worst_loss < 1e-10 && elapsed < 10.0,
                 std::to_string(instances) + " instances, worst residual " + sci(worst_residual) +
                     ", worst loss gap " + sci(worst_loss) + ", " + fixed(elapsed, 2) + " s");
}

// ---------------------------------------------------------------------------
// 2. Attention gradient against central differences
// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const Stopwatch clock;
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<std::size_t> classes(2, 8), dims(2, 12);
  std::uniform_int_distribution<Eigen::Index> vis(2, 16);
  const int instances = 24;
  double worst = 0.0;
  for (int trial = 0; trial < instances; ++trial) {
    const auto p = testing::make_attention_problem(rng, classes(rng), dims(rng), vis(rng), trial % 4 == 0);
    const double lambda = trial % 2 == 0 ? 0.01 : 0.3;
    const AttentionObjective objective(p.x, p.catalog, p.emb, lambda);
    const Eigen::VectorXd theta = gaussian_matrix(static_cast<Eigen::Index>(p.emb.dim()), 1, rng, 0.5);
    const Eigen::VectorXd analytic = objective.evaluate(theta).gradient;
    const Eigen::VectorXd numeric =
        testing::central_difference([&](const Eigen::VectorXd& t) { return objective.loss(t); }, theta, 1e-5);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      worst = std::max(worst, testing::relative_error(analytic[i], numeric[i]));
    }
  }
  const double elapsed = clock.seconds();
  return verdict(worst < 1e-5 && elapsed < 30.0, std::to_string(instances) + " instances, worst relative error " +
                                                     sci(worst) + ", " + fixed(elapsed, 2) + " s");
}

// ---------------------------------------------------------------------------
// 3. Reduction identities
// ---------------------------------------------------------------------------

Outcome reductions() {
  std::mt19937_64 rng(1003);
  double theta_gap = 0.0, uniform_gap = 0.0, hot_gap = 0.0;
  bool endpoints = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = testing::make_attention_problem(rng, 10, 8, 4, trial % 3 == 0);
    const auto average = build_prototype_set(p.catalog, p.emb, Method::DefAverage, {}).set.vectors();

    PrototypeParams zero;
    zero.theta = Eigen::VectorXd::Zero(8);
    const auto attention = build_prototype_set(p.catalog, p.emb, Method::DefAttention, zero).set.vectors();
    theta_gap = std::max(theta_gap, (attention - average).cwiseAbs().maxCoeff());

    std::normal_distribution<double> normal(0.0, 2.0);
    VisualnessTable::ScoreMap flat, random;
    // Scores are negative mean distances, so never positive.
    const double constant = -std::abs(normal(rng));
    for (const auto& t : p.emb.tokens()) {
      flat.emplace(t, constant);
      random.emplace(t, -std::abs(normal(rng)));
    }
    PrototypeParams tau;
    tau.tau = 1.0 + static_cast<double>(trial);
    const VisualnessTable uniform(flat);
    const auto uniform_set = build_prototype_set(p.catalog, p.emb, Method::DefVisualness, tau, &uniform).set.vectors();
    uniform_gap = std::max(uniform_gap, (uniform_set - average).cwiseAbs().maxCoeff());

    tau.tau = 1e9;
    const VisualnessTable varied(random);
    const auto hot = build_prototype_set(p.catalog, p.emb, Method::DefVisualness, tau, &varied).set.vectors();
    hot_gap = std::max(hot_gap, (hot - average).cwiseAbs().maxCoeff());

    const Eigen::VectorXd a = gaussian_matrix(8, 1, rng).normalized();
    const Eigen::VectorXd b = gaussian_matrix(8, 1, rng).normalized();
    endpoints = endpoints && combine(a, b, 1.0) == a && combine(a, b, 0.0) == b;
  }
  return verdict(theta_gap <= 1e-9 && uniform_gap <= 1e-9 && hot_gap <= 1e-6 && endpoints,
                 "theta=0 gap " + sci(theta_gap) + ", uniform visualness gap " + sci(uniform_gap) + ", tau=1e9 gap " +
                     sci(hot_gap) + ", combine endpoints " + (endpoints ? "exact" : "inexact"));
}

// ---------------------------------------------------------------------------
// 4. Visualness properties
// ---------------------------------------------------------------------------

// Multiples of 1/64 keep shifts and power-of-two scales exact in float.
WordImageBundle dyadic_bundle(std::mt19937_64& rng, std::size_t m, std::size_t d) {
  std::uniform_int_distribution<int> k(-512, 512);
  WordImageBundle b;
  b.token = "w";
  b.features.rows = m;
  b.features.dim = d;
  for (std::size_t i = 0; i < m * d; ++i) b.features.data.push_back(static_cast<float>(k(rng)) / 64.0f);
  return b;
}

Outcome visualness_properties() {
  std::mt19937_64 rng(1004);
  std::uniform_int_distribution<std::size_t> rows(1, 120), dims(1, 96);
  std::uniform_int_distribution<int> shift(-256, 256);
  double oracle_gap = 0.0, shift_gap = 0.0, scale_gap = 0.0;
  bool zero_spread = true;
  for (int trial = 0; trial < 60; ++trial) {
    const auto b = dyadic_bundle(rng, rows(rng), dims(rng));
    const double v = word_visualness(b);
    oracle_gap = std::max(oracle_gap, testing::relative_error(v, testing::brute_force_visualness(b), 1.0));

    auto shifted = b;
    std::vector<float> offset(b.features.dim);
    for (auto& o : offset) o = static_cast<float>(shift(rng)) / 4.0f;
    for (std::size_t i = 0; i < b.features.data.size(); ++i) shifted.features.data[i] += offset[i % b.features.dim];
    shift_gap = std::max(shift_gap, testing::relative_error(word_visualness(shifted), v, 1.0));

    const float alpha = std::ldexp(1.0f, trial % 7 - 3);
    auto scaled = b;
    for (auto& x : scaled.features.data) x *= alpha;
    scale_gap = std::max(scale_gap, testing::relative_error(word_visualness(scaled), alpha * v, 1.0));

    auto flat = b;
    for (std::size_t i = 0; i < flat.features.data.size(); ++i) flat.features.data[i] = offset[i % b.features.dim];
    zero_spread = zero_spread && word_visualness(flat) == 0.0;
  }
  return verdict(oracle_gap < 1e-10 && shift_gap < 1e-10 && scale_gap < 1e-10 && zero_spread,
                 "brute-force gap " + sci(oracle_gap) + ", translation gap " + sci(shift_gap) + ", scale gap " +
                     sci(scale_gap) + ", zero spread " + (zero_spread ? "exact" : "nonzero"));
}

// ---------------------------------------------------------------------------
// 5 and 6. Synthetic pipeline through the command line
// ---------------------------------------------------------------------------

constexpr std::string_view kPipelineMethod = "Classname+Def_visualness+Parent";

struct PipelineData {
  testing::ZslDataset ds;
  testing::DatasetFiles files;
  fs::path visualness;
};

PipelineData write_pipeline_data(const fs::path& dir) {
  PipelineData data;
  data.ds = testing::make_zsl_dataset();
  data.files = testing::write_dataset_files(dir, data.ds.emb, data.ds.catalog, data.ds.train, &data.ds.test);
  std::mt19937_64 rng(1005);
  std::normal_distribution<double> normal(1.0, 0.3);
  VisualnessTable::ScoreMap scores;
  for (const auto& t : data.ds.emb.tokens()) scores.emplace(t, -std::abs(normal(rng)));
  data.visualness = dir / "visualness.json";
  save_visualness_table(data.visualness, VisualnessTable(scores));
  return data;
}

// cv, then train with the selected parameters, then eval. Returns the eval directory.
fs::path run_pipeline(const PipelineData& data, const fs::path& out) {
  const std::string emb = data.files.embeddings.string(), classes = data.files.classes.string();
  zsl_cli({"cv", "--method", std::string(kPipelineMethod), "--embeddings", emb, "--classes", classes, "--features",
           data.files.train.string(), "--visualness", data.visualness.string(), "--seed", "17", "--out",
           (out / "cv").string()});
  zsl_cli({"train", "--config", (out / "cv" / "selected.json").string(), "--embeddings", emb, "--classes", classes,
           "--features", data.files.train.string(), "--visualness", data.visualness.string(), "--out",
           (out / "model").string()});
  zsl_cli({"eval", "--model", (out / "model").string(), "--test-features", data.files.test.string(), "--out",
           (out / "eval").string()});
  return out / "eval";
}

double report_accuracy(const fs::path& eval_dir, const std::string& key) {
  return nlohmann::json::parse(testing::slurp(eval_dir / "report.json"))["accuracy"][key].get<double>();
}

Outcome synthetic_end_to_end(const fs::path& scratch) {
  const Stopwatch clock;
  const auto data = write_pipeline_data(scratch / "data");
  const double top1 = report_accuracy(run_pipeline(data, scratch / "run"), "top1");

  const auto planted = testing::make_planted_dataset();
  const auto files = testing::write_dataset_files(scratch / "planted", planted.emb, planted.catalog, planted.train);
  zsl_cli({"attention", "--embeddings", files.embeddings.string(), "--classes", files.classes.string(), "--features",
           files.train.string(), "--lambda", "0.001", "--out", (scratch / "attention").string()});
  const auto model = load_attention_model(scratch / "attention" / "attention.json");
  const auto build = attention_forward(model.theta, planted.catalog, planted.emb);
  std::size_t hits = 0;
  for (std::size_t c = 0; c < build.reports.size(); ++c) {
    const auto& w = build.reports[c].weights;
    const auto best = std::max_element(w.begin(), w.end(), [](auto& a, auto& b) { return a.second < b.second; });
    if (best->first == planted.planted[c]) ++hits;
  }
  const double recovery = static_cast<double>(hits) / static_cast<double>(planted.planted.size());
  const double elapsed = clock.seconds();
  return verdict(top1 > 0.95 && recovery >= 0.9 && elapsed < 120.0,
                 "unseen top-1 " + fixed(top1) + " with " + std::string(kPipelineMethod) + ", planted words recovered " +
                     std::to_string(hits) + "/" + std::to_string(planted.planted.size()) + ", " + fixed(elapsed, 2) +
                     " s");
}

Outcome determinism(const fs::path& scratch) {
  const auto data = write_pipeline_data(scratch / "data");
  const auto a = run_pipeline(data, scratch / "first");
  const auto b = run_pipeline(data, scratch / "second");
  std::vector<std::string> differing;
  const std::vector<fs::path> files{"eval/report.json", "eval/report.csv", "cv/selected.json"};
  for (const auto& f : files) {
    const auto x = testing::slurp(a.parent_path() / f);
    if (x.empty() || x != testing::slurp(b.parent_path() / f)) differing.push_back(f.string());
  }
  std::string detail = differing.empty() ? "report.json, report.csv and selected.json byte-identical" : "differ:";
  for (const auto& d : differing) detail += " " + d;
  return verdict(differing.empty(), detail);
}

// ---------------------------------------------------------------------------
// 7. Format round trips
// ---------------------------------------------------------------------------

std::string random_token(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces{"a", "Z", "9", "_", "-", "'", ".", "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x90\x88"};
  std::uniform_int_distribution<std::size_t> length(1, 8), piece(0, pieces.size() - 1);
  std::string t;
  for (std::size_t i = length(rng); i > 0; --i) t += pieces[piece(rng)];
  return t;
}

// Any finite float, including subnormals and negative zero.
float random_float(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> bits;
  for (;;) {
    const float f = std::bit_cast<float>(bits(rng));
    if (std::isfinite(f)) return f;
  }
}

Outcome round_trips() {
  std::mt19937_64 rng(1007);
  std::uniform_int_distribution<std::size_t> small(0, 40), dims(1, 50);
  int failures = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    FeatureMatrix m;
    m.rows = small(rng);
    m.dim = dims(rng);
    for (std::size_t i = 0; i < m.rows * m.dim; ++i) m.data.push_back(random_float(rng));
    if (trial % 2 == 0) {
      for (std::size_t i = 0; i < m.rows; ++i) m.labels.push_back(random_token(rng) + " " + random_token(rng));
    }
    const auto bytes = write_feature_matrix(m);
    const auto back = read_feature_matrix(bytes);
    if (write_feature_matrix(back) != bytes || back.labels != m.labels ||
        std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)) != 0) {
      ++failures;
    }

    EmbeddingTable t(m.dim);
    const std::size_t words = 1 + small(rng);
    for (std::size_t w = 0; w < words; ++w) {
      std::vector<float> v(m.dim);
      for (auto& x : v) x = random_float(rng);
      t.add(random_token(rng) + std::to_string(w), v);
    }
    const std::string text = write_embedding_table(t);
    const auto parsed = parse_embedding_table(text);
    if (write_embedding_table(parsed) != text || parsed.size() != t.size()) ++failures;
  }
  return verdict(failures == 0, std::to_string(trials) + " packed matrices and " + std::to_string(trials) +
                                    " embedding tables, " + std::to_string(failures) + " mismatches");
}

// ---------------------------------------------------------------------------
// 8. Full-scale reproduction
// ---------------------------------------------------------------------------

Outcome full_scale(const fs::path& scratch) {
  const char* root = std::getenv("ZSL_FULLSCALE_DIR");
  if (root == nullptr || *root == '\0') return {Status::Skip, "set ZSL_FULLSCALE_DIR to run"};
  const fs::path dir(root);
  for (const char* f : {"embeddings.txt", "classes.jsonl", "train.zf", "test.zf", "visualness.json"}) {
    if (!fs::exists(dir / f)) return {Status::Fail, "missing " + (dir / f).string()};
  }
  auto top1 = [&](const std::string& direction) {
    const fs::path out = scratch / direction;
    zsl_cli({"cv", "--method", std::string(kPipelineMethod), "--direction", direction, "--embeddings",
             (dir / "embeddings.txt").string(), "--classes", (dir / "classes.jsonl").string(), "--features",
             (dir / "train.zf").string(), "--visualness", (dir / "visualness.json").string(), "--out",
             (out / "cv").string()});
    zsl_cli({"eval", "--model", (out / "cv").string(), "--test-features", (dir / "test.zf").string(), "--out",
             (out / "eval").string()});
    return 100.0 * report_accuracy(out / "eval", "top1");
  };
  const double s2v = top1("s2v");
  const double v2s = top1("v2s");
  const bool ok = std::abs(s2v - 17.8) <= 0.5 && std::abs(v2s - 9.1) <= 0.5 && s2v > v2s;
  return verdict(ok, "s2v top-1 " + fixed(s2v, 1) + " (expected 17.8), v2s top-1 " + fixed(v2s, 1) +
                         " (expected 9.1)");
}

}  // namespace

int main() {
  testing::TempDir scratch;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, ridge_oracle},
      {2, gradient_check},
      {3, reductions},
      {4, visualness_properties},
      {5, [&] { return synthetic_end_to_end(scratch / "end_to_end"); }},
      {6, [&] { return determinism(scratch / "determinism"); }},
      {7, round_trips},
      {8, [&] { return full_scale(scratch / "full_scale"); }},
  };
  bool failed = false;
  for (const auto& [number, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {Status::Fail, e.what()};
    }
    const char* label = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    std::cout << "criterion " << number << ": " << label << " (" << o.detail << ")" << std::endl;
    failed = failed || o.status == Status::Fail;
  }
  return failed ? 1 : 0;
}
