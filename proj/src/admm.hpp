// Internal: graph-form splitting solver over a presolved polyhedron.
#ifndef CONFIT_SRC_ADMM_HPP_
#define CONFIT_SRC_ADMM_HPP_

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "confit/losses.hpp"

namespace confit::detail {

/// lo <= x <= hi per variable, l <= A x <= u per general row. Rows of A have
/// unit Euclidean norm.
struct Polyhedron {
  Eigen::VectorXd lo, hi;
  Eigen::MatrixXd A;
  Eigen::VectorXd l, u;

  Eigen::Index width() const { return lo.size(); }
  Eigen::Index rows() const { return A.rows(); }
  double max_violation(const Eigen::VectorXd& x) const;
};

/// Builds the polyhedron from raw inequality/equality systems. Rows touching a
/// single variable become bounds. Returns nullopt when presolve proves the
/// system empty.
std::optional<Polyhedron> presolve(Eigen::Index width, const Eigen::MatrixXd& A_ineq, const Eigen::VectorXd& b_ineq,
                                   const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq);

/// Fix variable k to `value` (intersected with existing bounds).
bool fix_variable(Polyhedron& poly, Eigen::Index k, double value);

/// Optional block constraint sum_k g(x_k - center_k) <= radius on the first
/// center.size() variables.
struct LossBall {
  LossSpec spec;
  Eigen::VectorXd center;
  double radius = 0.0;
};

struct AdmmSettings {
  double tolerance = 1e-7;
  int max_iterations = 20000;
  bool polish = true;
};

struct AdmmResult {
  Eigen::VectorXd x;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool polished = false;
};

/// Euclidean projection onto { x : sum_k g(x_k - center_k) <= radius }.
Eigen::VectorXd project_ball(const LossSpec& spec, const Eigen::VectorXd& w, const Eigen::VectorXd& center,
                             double radius);

/// minimize sum_k objective[k](x_k) over the polyhedron (and the ball).
/// Variables beyond objective.size() carry no cost.
AdmmResult solve(const Polyhedron& poly, const std::vector<ScalarObjective>& objective,
                 const std::optional<LossBall>& ball, const Eigen::VectorXd& start, const AdmmSettings& settings);

}  // namespace confit::detail

#endif  // CONFIT_SRC_ADMM_HPP_
