#ifndef CONFIT_SOLVER_HPP_
#define CONFIT_SOLVER_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "confit/constraints.hpp"
#include "confit/losses.hpp"

namespace confit {

struct SolverOptions {
  double tolerance = 1e-7;
  int max_iterations = 20000;
  bool warm_start = true;
  /// Active-set refinement of the splitting iterate (polyhedral problems only).
  bool polish = true;
};

struct TrustRegion {
  TargetVector center;
  /// Radius in loss units: L(z, center) <= radius.
  double radius = 0.0;
};

/// An extra penalty weight * L(z, anchor) added to the objective.
struct WeightedAnchor {
  double weight = 1.0;
  TargetVector anchor;
};

/// minimize L(z, anchor) + sum_j w_j L(z, a_j) over z in C, optionally with
/// L(z, trust.center) <= trust.radius.
struct ProjectionProblem {
  LossSpec loss;
  TargetVector anchor;
  std::shared_ptr<const ConstraintSet> constraints;
  std::optional<TrustRegion> trust;
  std::vector<WeightedAnchor> extra_terms;
  /// Starting point for the splitting iterations (used when warm_start is on).
  std::optional<TargetVector> initial_guess;
};

struct SolverReport {
  TargetVector solution;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool polished = false;
  double objective = 0.0;
};

/// Throws InfeasibleError when presolve proves C empty, std::invalid_argument
/// on dimension errors. Non-convergence is reported, not thrown.
SolverReport project(const ProjectionProblem& problem, const SolverOptions& opts = {});

/// argmin { L(z, anchor) | L(z, center) <= beta, z in C }. `center` must be
/// feasible. beta = 0 returns the center; an infinite beta reduces to project().
SolverReport project_ball_intersection(const LossSpec& loss, const TargetVector& anchor, const TargetVector& center,
                                       double beta, std::shared_ptr<const ConstraintSet> constraints,
                                       const SolverOptions& opts = {},
                                       const std::optional<TargetVector>& initial_guess = std::nullopt);

/// Largest observed ||P(x1) - P(x2)|| / ||x1 - x2|| over `samples` random
/// pairs drawn from [-0.5, 1.5]^n. L2 for MSE, L1 for MAE and Huber.
double lipschitz_probe(const LossSpec& loss, std::shared_ptr<const ConstraintSet> constraints, int samples,
                       std::uint64_t seed, const SolverOptions& opts = {});

/// Euclidean projection onto { x : sum_k g(x_k - c_k) <= radius }.
/// Exposed for tests; `radius` is in unnormalized units (sum, not mean).
Eigen::VectorXd project_onto_loss_ball(const LossSpec& loss, const Eigen::VectorXd& w, const Eigen::VectorXd& center,
                                       double radius);

}  // namespace confit

#endif  // CONFIT_SOLVER_HPP_
