#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "confit/driver.hpp"
#include "oracles.hpp"

using namespace confit;

namespace {

Dataset fair_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto d = oracle::linear_dataset(n, 3, rng);
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    d.X(i, 0) = static_cast<double>(i % 2);
    d.y[i] += 0.4 * d.X(i, 0);
  }
  d.protected_features = build_protected(d, {0});
  return d;
}

RunConfig base_config(const Dataset& train, double epsilon_scale) {
  RunConfig cfg;
  cfg.learner = LearnerSpec::ridge(0.0);
  cfg.loss = LossSpec::mse();
  cfg.constraints = std::make_shared<const ConstraintSet>(build_didi_constraints(
      train.protected_features, epsilon_scale * didi_value(train.y, train.protected_features), train.n()));
  cfg.iterations = 10;
  return cfg;
}

}  // namespace

TEST_CASE("a feasible start with a zero trust radius is a fixed point") {
  const auto train = fair_dataset(40, 1);
  auto cfg = base_config(train, 100.0);
  cfg.beta = 0.0;
  cfg.iterations = 3;
  const auto h = run(cfg, train, Dataset{});
  REQUIRE(h.records.size() == 3);
  for (const auto& r : h.records) {
    CHECK(r.branch == Branch::Feasible);
    CHECK(r.residual < 1e-12);
    CHECK((r.z - h.initial_prediction).norm() < 1e-12);
  }
  CHECK(std::isnan(h.records[0].contraction_ratio));
  CHECK(std::isnan(h.records[0].r2_test));
}

TEST_CASE("alpha = 0 projects the labels every time") {
  const auto train = fair_dataset(30, 2);
  auto cfg = base_config(train, 1.0);
  cfg.constraints = std::make_shared<const ConstraintSet>(build_box(0.45, 0.6, train.n()));
  cfg.alpha = 0.0;
  cfg.iterations = 5;
  const auto h = run(cfg, train, Dataset{});
  const Eigen::VectorXd expected = train.y.cwiseMax(0.45).cwiseMin(0.6);
  int infeasible = 0;
  for (const auto& r : h.records) {
    if (r.branch != Branch::Infeasible) continue;
    ++infeasible;
    CHECK((r.z - expected).lpNorm<Eigen::Infinity>() < 1e-8);
  }
  CHECK(infeasible >= 1);
}

TEST_CASE("MSE contraction ratios stay below alpha") {
  auto train = fair_dataset(40, 3);
  // Hide the group column from the learner.
  train.X.col(0) = Eigen::VectorXd::LinSpaced(40, 0.0, 1.0);
  auto cfg = base_config(train, 0.05);
  cfg.alpha = 0.9;
  cfg.beta = 0.0;
  cfg.iterations = 40;
  const auto h = run(cfg, train, Dataset{});
  int checked = 0;
  for (std::size_t i = 1; i < h.records.size(); ++i) {
    if (h.records[i - 1].residual < 1e-9 || std::isnan(h.records[i].contraction_ratio)) continue;
    CHECK(h.records[i].contraction_ratio <= 0.9 + 1e-3);
    ++checked;
  }
  CHECK(checked >= 5);
}

TEST_CASE("MSE affine extension and moving targets agree under alpha_m = (1 - alpha) / alpha") {
  const auto train = fair_dataset(30, 4);
  const std::pair<double, double> pairs[] = {{0.5, 1.0}, {0.1, 9.0}, {0.9, 1.0 / 9.0}};
  for (const auto& [alpha, alpha_m] : pairs) {
    auto cfg = base_config(train, 0.2);
    cfg.alpha = alpha;
    cfg.iterations = 8;
    const auto a = run_affine_extension(cfg, train, Dataset{});
    cfg.alpha_m = alpha_m;
    const auto m = run_moving_targets(cfg, train, Dataset{});
    REQUIRE(a.records.size() == m.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].branch == m.records[i].branch);
      CHECK((a.records[i].z - m.records[i].z).lpNorm<Eigen::Infinity>() < 1e-7);
    }
    CHECK(m.alpha_m == alpha_m);
    CHECK(std::isnan(a.alpha_m));
  }
}

TEST_CASE("MAE master steps of the two algorithms differ") {
  // y = (1, 0), yhat = (0, 1), box [0, 0.2]^2, alpha = 0.25.
  const Eigen::Vector2d y(1, 0), yhat(0, 1);
  const double alpha = 0.25;
  const auto box = std::make_shared<const ConstraintSet>(build_box(0.0, 0.2, 2));

  ProjectionProblem ae;
  ae.loss = LossSpec::mae();
  ae.anchor = affine_extension(y, yhat, alpha);
  ae.constraints = box;
  CHECK(ae.anchor.isApprox(Eigen::Vector2d(0.75, 0.25)));

  ProjectionProblem mt = ae;
  mt.anchor = y;
  mt.extra_terms.push_back({1.0 / alpha_convert(alpha), yhat});

  const auto za = project(ae).solution;
  const auto zm = project(mt).solution;

  const auto brute = [&](auto&& f) {
    Eigen::Vector2d best;
    double best_value = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200; ++i)
      for (int j = 0; j <= 200; ++j) {
        const Eigen::Vector2d z(0.001 * i, 0.001 * j);
        if (const double v = f(z); v < best_value - 1e-15) {
          best_value = v;
          best = z;
        }
      }
    return best;
  };
  const auto ga = brute([&](const Eigen::Vector2d& z) { return (z - ae.anchor).lpNorm<1>(); });
  const auto gm = brute([&](const Eigen::Vector2d& z) { return (z - y).lpNorm<1>() + (z - yhat).lpNorm<1>() / 3.0; });
  CHECK((za - ga).norm() < 1e-7);
  CHECK((zm - gm).norm() < 1e-7);
  CHECK((za - Eigen::Vector2d(0.2, 0.2)).norm() < 1e-7);
  CHECK((zm - Eigen::Vector2d(0.2, 0.0)).norm() < 1e-7);
}

TEST_CASE("alpha conversion") {
  CHECK(alpha_convert(0.5) == 1.0);
  CHECK(alpha_convert(0.1) == doctest::Approx(9.0));
  CHECK(alpha_convert(1.0) == 0.0);
  CHECK_THROWS_AS(alpha_convert(0.0), std::invalid_argument);
  CHECK_THROWS_AS(alpha_convert(1.5), std::invalid_argument);
}

TEST_CASE("contraction verdicts") {
  CHECK(check_contraction_condition(LossSpec::mse(), 0.9).guaranteed);
  CHECK_FALSE(check_contraction_condition(LossSpec::mae(), 0.5).guaranteed);
  CHECK(check_contraction_condition(LossSpec::mae(), 0.2).guaranteed);
  CHECK_FALSE(check_contraction_condition(LossSpec::huber(0.1), 0.1).guaranteed);
  CHECK(check_contraction_condition(LossSpec::mae(), 0.2).label() == "guaranteed");
}

TEST_CASE("solver failures are flagged or raised") {
  const auto train = fair_dataset(40, 5);
  auto cfg = base_config(train, 0.1);
  cfg.iterations = 2;
  cfg.solver.max_iterations = 1;
  cfg.solver.polish = false;
  const auto h = run(cfg, train, Dataset{});
  REQUIRE(h.records.size() == 2);
  CHECK_FALSE(h.records[0].solve.converged);
  cfg.fail_hard = true;
  CHECK_THROWS_AS(run(cfg, train, Dataset{}), std::runtime_error);
}

TEST_CASE("residual norms and config validation") {
  const Eigen::Vector3d v(1, -2, 2);
  CHECK(residual_norm(LossSpec::mae(), v) == 5.0);
  CHECK(residual_norm(LossSpec::mse(), v) == 3.0);
  CHECK(parse_algorithm("moving_targets") == Algorithm::MovingTargets);
  CHECK_THROWS_AS(parse_algorithm("dykstra"), std::invalid_argument);

  const auto train = fair_dataset(20, 6);
  auto cfg = base_config(train, 0.5);
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(run(cfg, train, Dataset{}), std::invalid_argument);
  cfg.alpha = 0.5;
  cfg.constraints = std::make_shared<const ConstraintSet>(build_box(0, 1, 5));
  CHECK_THROWS_AS(run(cfg, train, Dataset{}), std::invalid_argument);
}
