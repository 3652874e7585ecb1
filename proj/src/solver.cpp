#include "confit/solver.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "admm.hpp"
#include "feasibility.hpp"

namespace confit {

namespace {

detail::Polyhedron presolved(const ConstraintSet& c) {
  auto poly = detail::presolve(static_cast<Eigen::Index>(c.width()), c.A_ineq(), c.b_ineq(), c.A_eq(), c.b_eq());
  if (!poly) throw InfeasibleError("presolve found contradictory rows");
  return *poly;
}

// One ScalarObjective per output coordinate. The 1/n of the loss is dropped:
// the argmin is unchanged and the splitting steps stay O(1) in scale.
std::vector<ScalarObjective> coordinate_objectives(const LossSpec& loss, const TargetVector& anchor,
                                                   const std::vector<WeightedAnchor>& extra) {
  std::vector<ScalarObjective> out;
  out.reserve(static_cast<std::size_t>(anchor.size()));
  std::vector<ScalarTerm> terms(1 + extra.size());
  for (Eigen::Index k = 0; k < anchor.size(); ++k) {
    terms[0] = ScalarTerm{1.0, anchor[k]};
    for (std::size_t j = 0; j < extra.size(); ++j) terms[j + 1] = ScalarTerm{extra[j].weight, extra[j].anchor[k]};
    out.emplace_back(loss, terms);
  }
  return out;
}

double objective_value(const LossSpec& loss, const TargetVector& z, const TargetVector& anchor,
                       const std::vector<WeightedAnchor>& extra) {
  double value = confit::loss(loss, z, anchor);
  for (const auto& term : extra) value += term.weight * confit::loss(loss, z, term.anchor);
  return value;
}

void check_dimensions(const ProjectionProblem& problem) {
  if (!problem.constraints) throw std::invalid_argument("projection problem has no constraint set");
  const auto n = static_cast<Eigen::Index>(problem.constraints->n());
  if (problem.anchor.size() != n) throw std::invalid_argument("anchor dimension differs from constraint set");
  for (const auto& term : problem.extra_terms) {
    if (term.anchor.size() != n) throw std::invalid_argument("extra term dimension differs from constraint set");
    if (!(term.weight >= 0.0)) throw std::invalid_argument("extra term weight must be nonnegative");
  }
  if (problem.trust && problem.trust->center.size() != n)
    throw std::invalid_argument("trust center dimension differs from constraint set");
  problem.loss.validate();
}

Eigen::VectorXd start_point(const ConstraintSet& c, const std::optional<TargetVector>& guess, bool warm_start) {
  Eigen::VectorXd start = c.witness();
  if (warm_start && guess) {
    const auto n = static_cast<Eigen::Index>(c.n());
    start.head(n) = *guess;
    if (c.n_aux() > 0 && c.has_aux_rule()) start.tail(static_cast<Eigen::Index>(c.n_aux())) = c.aux_for(*guess);
  }
  return start;
}

SolverReport to_report(const detail::AdmmResult& r, const ProjectionProblem& problem) {
  SolverReport report;
  report.solution = r.x.head(static_cast<Eigen::Index>(problem.constraints->n()));
  report.primal_residual = r.primal_residual;
  report.dual_residual = r.dual_residual;
  report.iterations = r.iterations;
  report.converged = r.converged;
  report.polished = r.polished;
  report.objective = objective_value(problem.loss, report.solution, problem.anchor, problem.extra_terms);
  return report;
}

detail::AdmmSettings settings_from(const SolverOptions& opts) {
  if (!(opts.tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  if (opts.max_iterations < 1) throw std::invalid_argument("solver max_iterations must be >= 1");
  return detail::AdmmSettings{opts.tolerance, opts.max_iterations, opts.polish};
}

SolverReport project_without_trust(const ProjectionProblem& problem, const SolverOptions& opts) {
  const auto poly = presolved(*problem.constraints);
  const auto objective = coordinate_objectives(problem.loss, problem.anchor, problem.extra_terms);
  const auto start = start_point(*problem.constraints, problem.initial_guess, opts.warm_start);
  return to_report(detail::solve(poly, objective, std::nullopt, start, settings_from(opts)), problem);
}

SolverReport center_report(const TargetVector& center, const ProjectionProblem& problem) {
  SolverReport report;
  report.solution = center;
  report.converged = true;
  report.objective = objective_value(problem.loss, center, problem.anchor, problem.extra_terms);
  return report;
}

}  // namespace

SolverReport project(const ProjectionProblem& problem, const SolverOptions& opts) {
  check_dimensions(problem);
  if (!problem.trust) return project_without_trust(problem, opts);

  const auto& trust = *problem.trust;
  if (!(trust.radius >= 0.0)) throw std::invalid_argument("trust radius must be nonnegative");
  if (std::isinf(trust.radius)) {
    ProjectionProblem plain = problem;
    plain.trust.reset();
    return project_without_trust(plain, opts);
  }
  if (trust.radius == 0.0) return center_report(trust.center, problem);

  if (problem.loss.kind == LossKind::MSE && problem.extra_terms.empty()) {
    // Lagrangian route: for MSE the minimizer of L(z, y) + mu L(z, c) over C is
    // the projection of (1 - s) y + s c with s = mu / (1 + mu). The ball value
    // along s is continuous and nonincreasing, so bisect s on [0, 1].
    ProjectionProblem inner = problem;
    inner.trust.reset();
    SolverReport best = project_without_trust(inner, opts);
    int total_iterations = best.iterations;
    if (confit::loss(problem.loss, best.solution, trust.center) <= trust.radius) return best;

    double lo = 0.0, hi = 1.0;
    best = center_report(trust.center, problem);
    for (int step = 0; step < 64 && hi - lo > 1e-15; ++step) {
      const double s = 0.5 * (lo + hi);
      inner.anchor = (1.0 - s) * problem.anchor + s * trust.center;
      inner.initial_guess = best.solution;
      SolverReport candidate = project_without_trust(inner, opts);
      total_iterations += candidate.iterations;
      const double level = confit::loss(problem.loss, candidate.solution, trust.center);
      if (level > trust.radius) {
        lo = s;
      } else {
        hi = s;
        best = candidate;
        if (trust.radius - level <= 1e-14 * std::max(1.0, trust.radius)) break;
      }
    }
    best.iterations = total_iterations;
    best.objective = objective_value(problem.loss, best.solution, problem.anchor, problem.extra_terms);
    return best;
  }

  // The ball as its own block in the splitting, projected exactly each step.
  const auto poly = presolved(*problem.constraints);
  const auto objective = coordinate_objectives(problem.loss, problem.anchor, problem.extra_terms);
  const double n = static_cast<double>(problem.anchor.size());
  detail::LossBall ball{problem.loss, trust.center, trust.radius * n};
  const auto start = start_point(*problem.constraints, problem.initial_guess, opts.warm_start);
  return to_report(detail::solve(poly, objective, ball, start, settings_from(opts)), problem);
}

SolverReport project_ball_intersection(const LossSpec& loss, const TargetVector& anchor, const TargetVector& center,
                                       double beta, std::shared_ptr<const ConstraintSet> constraints,
                                       const SolverOptions& opts, const std::optional<TargetVector>& initial_guess) {
  ProjectionProblem problem;
  problem.loss = loss;
  problem.anchor = anchor;
  problem.constraints = std::move(constraints);
  problem.trust = TrustRegion{center, beta};
  problem.initial_guess = initial_guess;
  return project(problem, opts);
}

double lipschitz_probe(const LossSpec& loss, std::shared_ptr<const ConstraintSet> constraints, int samples,
                       std::uint64_t seed, const SolverOptions& opts) {
  if (samples < 1) throw std::invalid_argument("lipschitz_probe: samples must be positive");
  const auto n = static_cast<Eigen::Index>(constraints->n());
  std::mt19937_64 engine(seed);
  const auto uniform = [&engine] { return -0.5 + 2.0 * static_cast<double>(engine() >> 11) * 0x1.0p-53; };
  const auto norm = [&loss](const Eigen::VectorXd& v) { return loss.kind == LossKind::MSE ? v.norm() : v.lpNorm<1>(); };

  ProjectionProblem problem;
  problem.loss = loss;
  problem.constraints = constraints;
  SolverOptions cold = opts;
  cold.warm_start = false;

  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd x1(n), x2(n);
    for (Eigen::Index k = 0; k < n; ++k) x1[k] = uniform();
    for (Eigen::Index k = 0; k < n; ++k) x2[k] = uniform();
    const double gap = norm(x1 - x2);
    if (gap == 0.0) continue;
    problem.anchor = x1;
    const auto p1 = project(problem, cold).solution;
    problem.anchor = x2;
    const auto p2 = project(problem, cold).solution;
    worst = std::max(worst, norm(p1 - p2) / gap);
  }
  return worst;
}

Eigen::VectorXd project_onto_loss_ball(const LossSpec& loss, const Eigen::VectorXd& w, const Eigen::VectorXd& center,
                                       double radius) {
  if (w.size() != center.size()) throw std::invalid_argument("project_onto_loss_ball: dimension mismatch");
  return detail::project_ball(loss, w, center, radius);
}

namespace detail {

std::optional<Eigen::VectorXd> find_feasible_point(const Eigen::MatrixXd& A_ineq, const Eigen::VectorXd& b_ineq,
                                                   const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                                                   const Eigen::VectorXd& hint, std::size_t fixed_prefix, double tol) {
  const Eigen::Index width = hint.size();
  auto poly = presolve(width, A_ineq, b_ineq, A_eq, b_eq);
  if (!poly) return std::nullopt;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(fixed_prefix); ++k)
    if (!fix_variable(*poly, k, hint[k])) return std::nullopt;

  std::vector<ScalarObjective> objective;
  objective.reserve(static_cast<std::size_t>(width));
  for (Eigen::Index k = 0; k < width; ++k) {
    const ScalarTerm term{1.0, hint[k]};
    objective.emplace_back(LossSpec::mse(), std::span<const ScalarTerm>(&term, 1));
  }
  const auto result = solve(*poly, objective, std::nullopt, hint, AdmmSettings{1e-9, 5000, true});

  // Check against the raw rows, not the normalized ones.
  Eigen::VectorXd x = result.x;
  double worst = 0.0;
  if (A_ineq.rows() > 0) worst = std::max(worst, (A_ineq * x - b_ineq).maxCoeff());
  if (A_eq.rows() > 0) worst = std::max(worst, (A_eq * x - b_eq).cwiseAbs().maxCoeff());
  if (worst > tol) return std::nullopt;
  return x;
}

}  // namespace detail

}  // namespace confit
