#include <random>

#include <Eigen/QR>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "synthetic.hpp"
#include "zsl/attention.hpp"
#include "zsl/errors.hpp"
#include "zsl/ridge.hpp"

namespace zsl {
namespace {

using testing::gaussian_matrix;

testing::AttentionProblem random_problem(std::mt19937_64& rng, std::size_t classes, std::size_t k, Eigen::Index d,
                                         bool with_empty_definition = false) {
  return testing::make_attention_problem(rng, classes, k, d, with_empty_definition);
}

TEST(Attention, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(200);
  std::uniform_int_distribution<std::size_t> classes(2, 8);
  std::uniform_int_distribution<std::size_t> dims(2, 12);
  std::uniform_int_distribution<Eigen::Index> vis(2, 16);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(rng, classes(rng), dims(rng), vis(rng), trial % 4 == 0);
    const double lambda = trial % 2 == 0 ? 0.01 : 0.3;
    const AttentionObjective objective(p.x, p.catalog, p.emb, lambda);
    const Eigen::VectorXd theta = gaussian_matrix(static_cast<Eigen::Index>(p.emb.dim()), 1, rng, 0.5);
    const auto eval = objective.evaluate(theta);
    const Eigen::VectorXd numeric =
        testing::central_difference([&](const Eigen::VectorXd& t) { return objective.loss(t); }, theta, 1e-5);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      EXPECT_LT(testing::relative_error(eval.gradient[i], numeric[i]), 1e-5)
          << "trial " << trial << " component " << i << ": " << eval.gradient[i] << " vs " << numeric[i];
    }
    EXPECT_EQ(eval.loss, objective.loss(theta));
  }
}

TEST(Attention, LossMatchesExplicitRidgeOnForwardPrototypes) {
  std::mt19937_64 rng(201);
  const auto p = random_problem(rng, 6, 8, 10);
  const Eigen::VectorXd theta = gaussian_matrix(8, 1, rng);
  const double lambda = 0.05;
  const auto protos = attention_forward(theta, p.catalog, p.emb).set;
  const Eigen::MatrixXd t = testing::design_matrix(p.x, protos);
  const Eigen::MatrixXd x = p.x.to_eigen();
  const Eigen::MatrixXd w = testing::cg_ridge(t, lambda * static_cast<double>(p.x.rows), t.transpose() * x);
  EXPECT_LT(testing::relative_error(attention_loss(theta, p.x, p.catalog, p.emb, lambda),
                                    testing::explicit_ridge_loss(x, t, w, lambda), 1.0),
            1e-10);
}

TEST(Attention, ZeroThetaReproducesDefAverage) {
  std::mt19937_64 rng(202);
  const auto p = random_problem(rng, 7, 5, 4, true);
  const auto attention = attention_forward(Eigen::VectorXd::Zero(5), p.catalog, p.emb).set.vectors();
  const auto average = build_prototype_set(p.catalog, p.emb, Method::DefAverage, {}).set.vectors();
  EXPECT_LE((attention - average).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Attention, ZeroThetaLossIsRidgeLossOnDefAverage) {
  std::mt19937_64 rng(208);
  const auto p = random_problem(rng, 6, 7, 9, true);
  const double lambda = 0.02;
  const auto average = build_prototype_set(p.catalog, p.emb, Method::DefAverage, {}).set;
  const double expected = ridge_loss(fit_ridge_s2v(p.x, average, lambda), p.x, average);
  EXPECT_LT(testing::relative_error(attention_loss(Eigen::VectorXd::Zero(7), p.x, p.catalog, p.emb, lambda), expected,
                                    1.0),
            1e-12);
}

TEST(Attention, ThetaOrthogonalToVocabularyChangesNothing) {
  std::mt19937_64 rng(209);
  const auto p = random_problem(rng, 2, 14, 5);  // 10 words in K = 14
  Eigen::MatrixXd words(14, static_cast<Eigen::Index>(p.emb.size()));
  for (std::size_t w = 0; w < p.emb.size(); ++w) {
    words.col(static_cast<Eigen::Index>(w)) = p.emb.lookup_vector(p.emb.tokens()[w]).value();
  }
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(words).householderQ();
  const Eigen::VectorXd orthogonal = 3.0 * q.col(12) - 2.0 * q.col(13);
  ASSERT_LT((words.transpose() * orthogonal).cwiseAbs().maxCoeff(), 1e-12);

  const Eigen::VectorXd theta = gaussian_matrix(14, 1, rng);
  const auto a = attention_forward(theta, p.catalog, p.emb).set.vectors();
  const auto b = attention_forward(theta + orthogonal, p.catalog, p.emb).set.vectors();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, SingleTokenDefinitionsHaveZeroGradient) {
  std::mt19937_64 rng(210);
  auto p = random_problem(rng, 5, 4, 6);
  std::vector<ClassRecord> records = p.catalog.classes();
  for (std::size_t c = 0; c < records.size(); ++c) {
    records[c].definition = "w" + std::to_string(c + 5);
    records[c].definition_tokens = tokenize_definition(records[c].definition);
  }
  const ClassCatalog single(std::move(records));
  const Eigen::VectorXd theta = gaussian_matrix(4, 1, rng);
  EXPECT_EQ(attention_grad(theta, p.x, single, p.emb, 0.1).norm(), 0.0);

  AttentionOptions options;
  options.epochs = 1;
  EXPECT_TRUE(train_attention(p.x, single, p.emb, 0.1, options).theta.isZero(0.0));
}

TEST(Attention, OneDimensionalEmbeddingsHaveZeroGradient) {
  // With K = 1 every normalized prototype is ±1 whatever θ is.
  std::mt19937_64 rng(203);
  const auto p = random_problem(rng, 4, 1, 3);
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 0.7);
  EXPECT_EQ(attention_grad(theta, p.x, p.catalog, p.emb, 0.1).norm(), 0.0);
}

TEST(Attention, UnknownLabelIsInputError) {
  std::mt19937_64 rng(204);
  auto p = random_problem(rng, 3, 4, 3);
  p.x.labels[0] = "stranger";
  EXPECT_THROW(AttentionObjective(p.x, p.catalog, p.emb, 0.1), InputError);
}

TEST(Attention, TrainingLogIsNonIncreasingAndDeterministic) {
  std::mt19937_64 rng(205);
  const auto p = random_problem(rng, 8, 6, 10);
  AttentionOptions options;
  options.epochs = 25;
  const auto a = train_attention(p.x, p.catalog, p.emb, 0.05, options);
  ASSERT_EQ(a.training_log.size(), 26u);
  for (std::size_t i = 1; i < a.training_log.size(); ++i) EXPECT_LE(a.training_log[i], a.training_log[i - 1]);
  EXPECT_LT(a.training_log.back(), a.training_log.front());
  const auto b = train_attention(p.x, p.catalog, p.emb, 0.05, options);
  EXPECT_TRUE(a.theta == b.theta);
  EXPECT_EQ(a.training_log, b.training_log);
}

TEST(Attention, GaussianInitFollowsSeed) {
  std::mt19937_64 rng(206);
  const auto p = random_problem(rng, 4, 6, 5);
  AttentionOptions options;
  options.epochs = 1;
  options.init = ThetaInit::Gaussian;
  options.seed = 1;
  const auto a = train_attention(p.x, p.catalog, p.emb, 0.1, options);
  const auto a2 = train_attention(p.x, p.catalog, p.emb, 0.1, options);
  options.seed = 2;
  const auto b = train_attention(p.x, p.catalog, p.emb, 0.1, options);
  EXPECT_TRUE(a.theta == a2.theta);
  EXPECT_FALSE(a.theta == b.theta);
  EXPECT_EQ(a.seed, 1u);
}

TEST(Attention, DefaultsToFiftyEpochs) { EXPECT_EQ(AttentionOptions{}.epochs, 50u); }

TEST(Attention, RecoversPlantedVisualWords) {
  const auto ds = testing::make_planted_dataset();
  const auto model = train_attention(ds.train, ds.catalog, ds.emb, 1e-3);
  const auto build = attention_forward(model.theta, ds.catalog, ds.emb);
  std::size_t hits = 0;
  for (std::size_t c = 0; c < build.reports.size(); ++c) {
    const auto& w = build.reports[c].weights;
    const auto best = std::max_element(w.begin(), w.end(), [](auto& a, auto& b) { return a.second < b.second; });
    if (best->first == ds.planted[c]) ++hits;
  }
  EXPECT_GE(static_cast<double>(hits), 0.9 * static_cast<double>(ds.planted.size()));
}

TEST(Attention, JsonRoundTripIsExact) {
  std::mt19937_64 rng(207);
  AttentionModel m{gaussian_matrix(7, 1, rng), {3.5, 2.25, 2.0}, 99};
  const auto back = attention_model_from_json(attention_model_to_json(m));
  EXPECT_TRUE(back.theta == m.theta);
  EXPECT_EQ(back.training_log, m.training_log);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_THROW(attention_model_from_json("{\"seed\": 1}"), InputError);
}

}  // namespace
}  // namespace zsl
