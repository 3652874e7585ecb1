#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "confit/constraints.hpp"
#include "oracles.hpp"

using namespace confit;

namespace {

std::vector<ProtectedSpec> alternating_groups() {
  ProtectedSpec p;
  p.groups[0.0] = {0, 2};
  p.groups[1.0] = {1, 3};
  return {p};
}

}  // namespace

TEST_CASE("didi value") {
  const auto groups = alternating_groups();
  CHECK(didi_value(Eigen::Vector4d::Constant(0.3), groups) == 0.0);
  CHECK(didi_value(Eigen::Vector4d(1, 0, 1, 0), groups) == doctest::Approx(1.0));
  CHECK(didi_epsilon(Eigen::Vector4d(1, 0, 1, 0), groups, 0.2) == doctest::Approx(0.2));
}

TEST_CASE("didi value matches brute force with two protected features") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 20; ++rep) {
    Dataset d;
    d.X.resize(8, 2);
    std::vector<std::vector<int>> cols(2, std::vector<int>(8));
    for (int r = 0; r < 8; ++r) {
      cols[0][r] = r % 2;
      cols[1][r] = (r * 7 + rep) % 3;
      d.X(r, 0) = cols[0][r];
      d.X(r, 1) = cols[1][r];
    }
    std::vector<double> z(8);
    for (auto& v : z) v = u(rng);
    const auto groups = build_protected(d, {0, 1});
    CHECK(didi_value(Eigen::Map<Eigen::VectorXd>(z.data(), 8), groups) ==
          doctest::Approx(oracle::brute_didi(z, cols)).epsilon(1e-12));
  }
}

TEST_CASE("didi constraint membership") {
  const auto groups = alternating_groups();
  const auto loose = build_didi_constraints(groups, 4.0, 4);
  CHECK(is_member(loose, Eigen::Vector4d(1, 0, 1, 0)));
  CHECK(is_member(build_didi_constraints(groups, 0.0, 4), Eigen::Vector4d::Constant(0.7)));
  CHECK_FALSE(is_member(build_didi_constraints(groups, 0.5, 4), Eigen::Vector4d(1, 0, 1, 0)));
  CHECK(is_member(build_didi_constraints(groups, 1.0, 4), Eigen::Vector4d(1, 0, 1, 0), 1e-9));
  CHECK(loose.n_aux() == 2);
  CHECK(loose.has_aux_rule());
  CHECK_THROWS_AS(build_didi_constraints(groups, -1.0, 4), std::invalid_argument);
}

TEST_CASE("zero epsilon with singleton groups forces equal coordinates") {
  ProtectedSpec p;
  p.groups[0.0] = {0};
  p.groups[1.0] = {1};
  const auto c = build_didi_constraints({p}, 0.0, 2);
  CHECK(is_member(c, Eigen::Vector2d(0.4, 0.4)));
  CHECK_FALSE(is_member(c, Eigen::Vector2d(0.4, 0.41)));
  // The encoding admits (z, u) only with u = 0 and z1 = z2.
  CHECK(c.max_violation((Eigen::VectorXd(4) << 0.3, 0.3, 0.0, 0.0).finished()) <= 1e-15);
  CHECK(c.max_violation((Eigen::VectorXd(4) << 0.3, 0.5, 0.0, 0.0).finished()) > 0.05);
}

TEST_CASE("box constraints") {
  const auto box = build_box(0.0, 1.0, 3);
  CHECK(is_member(box, Eigen::Vector3d::Constant(0.5)));
  CHECK_FALSE(is_member(box, Eigen::Vector3d(0.5, 1.2, 0.5)));
  const auto point = build_box(0.3, 0.3, 2);
  CHECK(is_member(point, Eigen::Vector2d(0.3, 0.3)));
  CHECK_FALSE(is_member(point, Eigen::Vector2d(0.3, 0.31)));
  CHECK_THROWS_AS(build_box(1.0, 0.0, 2), std::invalid_argument);
}

TEST_CASE("intersections") {
  const auto both = intersect(build_box(0.0, 1.0, 2), build_box(0.5, 2.0, 2));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.5, 2.5);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d z(u(rng), u(rng));
    const bool expected = z.minCoeff() >= 0.5 && z.maxCoeff() <= 1.0;
    CHECK(is_member(both, z) == expected);
  }
  CHECK_THROWS_AS(intersect(build_box(0.0, 0.4, 2), build_box(0.6, 1.0, 2)), InfeasibleError);

  const auto fair = intersect(build_didi_constraints(alternating_groups(), 0.0, 4), build_box(0.0, 1.0, 4));
  CHECK(is_member(fair, Eigen::Vector4d::Constant(0.2)));
  CHECK(fair.n_aux() == 2);
  CHECK(fair.max_violation(fair.witness()) <= 1e-9);
}

TEST_CASE("custom constraint sets") {
  Eigen::MatrixXd A(2, 2);
  A << 1, 1, -1, -1;
  const auto c = ConstraintSet::custom(A, Eigen::Vector2d(1.0, -0.5), Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), 2, 0);
  CHECK(is_member(c, Eigen::Vector2d(0.3, 0.3)));
  CHECK_FALSE(is_member(c, Eigen::Vector2d(0.1, 0.1)));
  CHECK_THROWS_AS(
      ConstraintSet::custom(A, Eigen::Vector2d(1.0, -1.5), Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), 2, 0),
      InfeasibleError);
  CHECK(is_member(ConstraintSet::unconstrained(3), Eigen::Vector3d(-9, 9, 1e6)));
  CHECK_THROWS_AS(is_member(c, Eigen::Vector3d::Zero()), std::invalid_argument);
}
