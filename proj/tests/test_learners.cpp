#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "confit/learners.hpp"
#include "oracles.hpp"

using namespace confit;

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
  return X;
}

GbtParams stump_params(double lr) {
  GbtParams p;
  p.trees = 1;
  p.max_depth = 1;
  p.learning_rate = lr;
  p.min_samples_leaf = 1;
  return p;
}

}  // namespace

TEST_CASE("ridge interpolates exactly linear data") {
  std::mt19937_64 rng(1);
  const auto X = uniform_matrix(20, 3, rng);
  const Eigen::Vector3d w(0.5, -1.0, 2.0);
  const Eigen::VectorXd y = (X * w).array() + 0.25;
  const auto m = fit(LearnerSpec::ridge(0.0), X, y, LossSpec::mse());
  CHECK((m.weights() - w).norm() < 1e-10);
  CHECK(m.intercept() == doctest::Approx(0.25));
  CHECK(m.training_loss() <= 1e-12);
  CHECK((m.predict(X) - y).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("heavy ridge predicts the mean") {
  std::mt19937_64 rng(2);
  const auto X = uniform_matrix(30, 4, rng);
  const Eigen::VectorXd y = uniform_matrix(30, 1, rng);
  const auto m = fit(LearnerSpec::ridge(1e12), X, y, LossSpec::mse());
  CHECK(m.weights().norm() < 1e-9);
  CHECK((m.predict(X).array() - y.mean()).abs().maxCoeff() < 1e-9);
}

TEST_CASE("ridge is the orthogonal projection onto span [1 X]") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const auto X = uniform_matrix(12, 3, rng);
    const Eigen::VectorXd z = uniform_matrix(12, 1, rng);
    const Eigen::VectorXd expected = oracle::ridge_projector(X) * z;
    const auto m = range_projection_fit(LearnerSpec::ridge(0.0), X, z, LossSpec::mse());
    CHECK((m.predict(X) - expected).lpNorm<Eigen::Infinity>() < 1e-10);
    const Eigen::VectorXd again = fit(LearnerSpec::ridge(0.0), X, m.predict(X), LossSpec::mse()).predict(X);
    CHECK((again - m.predict(X)).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("penalized ridge is nonexpansive") {
  std::mt19937_64 rng(4);
  const auto X = uniform_matrix(25, 3, rng);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd z1 = uniform_matrix(25, 1, rng), z2 = uniform_matrix(25, 1, rng);
    const auto p1 = fit(LearnerSpec::ridge(0.3), X, z1, LossSpec::mse()).predict(X);
    const auto p2 = fit(LearnerSpec::ridge(0.3), X, z2, LossSpec::mse()).predict(X);
    CHECK((p1 - p2).norm() <= (z1 - z2).norm() + 1e-12);
  }
}

TEST_CASE("singular unpenalized ridge is rejected") {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd X = uniform_matrix(10, 2, rng);
  X.col(1) = 2.0 * X.col(0);
  CHECK_THROWS_AS(fit(LearnerSpec::ridge(0.0), X, Eigen::VectorXd::Ones(10), LossSpec::mse()), LearnerError);
  CHECK_NOTHROW(fit(LearnerSpec::ridge(0.1), X, Eigen::VectorXd::Ones(10), LossSpec::mse()));
}

TEST_CASE("one full-rate stump equals the best exhaustive split") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 10; ++rep) {
    const auto X = uniform_matrix(40, 1, rng);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) y[i] = (X(i, 0) > 0.4 ? 1.0 : 0.0) + 0.3 * u(rng);
    const auto m = fit(LearnerSpec::gradient_boosted_trees(stump_params(1.0)), X, y, LossSpec::mse());
    std::vector<double> x(X.data(), X.data() + 40), r(40);
    for (int i = 0; i < 40; ++i) r[i] = y[i] - y.mean();
    const auto best = oracle::best_stump(x, r, 1);
    CHECK(m.training_loss() == doctest::Approx(best.sse / 40.0).epsilon(1e-12));
    CHECK(m.trees().front().leaf_count() == 2);
    const auto pred = m.predict(X);
    std::set<double> levels(pred.data(), pred.data() + pred.size());
    CHECK(levels.size() == 2);
  }
}

TEST_CASE("boosting never increases the training loss") {
  std::mt19937_64 rng(7);
  const auto X = uniform_matrix(80, 3, rng);
  Eigen::VectorXd y(80);
  for (int i = 0; i < 80; ++i) y[i] = std::sin(4 * X(i, 0)) + X(i, 1) * X(i, 2);
  for (const auto& loss : {LossSpec::mse(), LossSpec::mae(), LossSpec::huber(0.1)}) {
    GbtParams p;
    p.trees = 30;
    const auto m = fit(LearnerSpec::gradient_boosted_trees(p), X, y, loss);
    double previous = confit::loss(loss, m.predict_rounds(X, 0), y);
    for (std::size_t k = 1; k <= 30; ++k) {
      const double current = confit::loss(loss, m.predict_rounds(X, k), y);
      CHECK(current <= previous + 1e-12);
      previous = current;
    }
    CHECK(m.predict_rounds(X, 30) == m.predict(X));
    CHECK(previous == doctest::Approx(m.training_loss()));
  }
}

TEST_CASE("boosting base case and determinism") {
  std::mt19937_64 rng(8);
  const auto X = uniform_matrix(50, 2, rng);
  const Eigen::VectorXd y = uniform_matrix(50, 1, rng);
  const auto spec = LearnerSpec::gradient_boosted_trees();
  const auto a = fit(spec, X, y, LossSpec::mse());
  const auto b = fit(spec, X, y, LossSpec::mse());
  CHECK((a.predict_rounds(X, 0).array() == y.mean()).all());
  CHECK(a.predict(X) == b.predict(X));
  CHECK(predict(a, X) == a.predict(X));
  CHECK_THROWS_AS(a.predict(Eigen::MatrixXd::Zero(3, 5)), std::invalid_argument);
}

TEST_CASE("learner spec validation") {
  GbtParams p;
  p.learning_rate = 0.0;
  CHECK_THROWS_AS(LearnerSpec::gradient_boosted_trees(p).validate(), std::invalid_argument);
  CHECK_THROWS_AS(LearnerSpec::ridge(-1.0).validate(), std::invalid_argument);
  CHECK(parse_learner_kind("gbt") == LearnerKind::GradientBoostedTrees);
  CHECK_THROWS_AS(parse_learner_kind("forest"), std::invalid_argument);
  CHECK_THROWS_AS(fit(LearnerSpec::ridge(0.0), Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(4), LossSpec::mse()),
                  std::invalid_argument);
}
