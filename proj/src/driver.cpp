#include "confit/driver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "confit/metrics.hpp"

namespace confit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_r2(const TargetVector& truth, const TargetVector& pred) {
  if (truth.size() < 2) return kNaN;
  try {
    return r_squared(truth, pred);
  } catch (const MetricError&) {
    return kNaN;
  }
}

double safe_c(const TargetVector& pred, const std::vector<ProtectedSpec>& groups, double reference) {
  if (groups.empty() || !(reference > 0.0) || pred.size() == 0) return kNaN;
  return didi_ratio(pred, groups, reference);
}

double label_didi(const Dataset& data) {
  if (data.protected_features.empty() || data.n() == 0) return 0.0;
  return didi_value(data.y, data.protected_features);
}

}  // namespace

std::string to_string(Algorithm algorithm) {
  return algorithm == Algorithm::AffineExtension ? "affine_extension" : "moving_targets";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "affine_extension" || name == "affine" || name == "A") return Algorithm::AffineExtension;
  if (name == "moving_targets" || name == "M") return Algorithm::MovingTargets;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) +
                              "' (expected affine_extension or moving_targets)");
}

std::string to_string(Branch branch) { return branch == Branch::Infeasible ? "infeasible" : "feasible"; }

Branch parse_branch(std::string_view name) {
  if (name == "infeasible") return Branch::Infeasible;
  if (name == "feasible") return Branch::Feasible;
  throw std::invalid_argument("unknown branch '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!(membership_tolerance >= 0.0)) throw std::invalid_argument("membership tolerance must be >= 0");
  if (!(stop_tolerance >= 0.0)) throw std::invalid_argument("stop tolerance must be >= 0");
  if (!constraints) throw std::invalid_argument("run has no constraint set");
  loss.validate();
  learner.validate();
  if (algorithm == Algorithm::MovingTargets) moving_targets_weight();
}

double RunConfig::moving_targets_weight() const {
  if (alpha_m) {
    if (!(*alpha_m > 0.0) || !std::isfinite(*alpha_m)) throw std::invalid_argument("alpha_m must be positive");
    return *alpha_m;
  }
  return alpha_convert(alpha);
}

std::size_t IterationHistory::branch_count(Branch branch) const {
  std::size_t count = 0;
  for (const auto& r : records) count += r.branch == branch ? 1 : 0;
  return count;
}

ContractionVerdict check_contraction_condition(const LossSpec& loss, double alpha) {
  ContractionVerdict v;
  switch (loss.kind) {
    case LossKind::MSE:
      v.bound = 1.0;
      v.guaranteed = alpha >= 0.0 && alpha < 1.0;
      v.note = "projections are nonexpansive (K = 1); contraction for alpha < 1";
      break;
    case LossKind::MAE:
      v.bound = 0.25;
      v.guaranteed = alpha >= 0.0 && alpha < 0.25;
      v.note = "L1 projections have K = 2; contraction for alpha < 1/K^2 = 0.25";
      break;
    case LossKind::Huber:
      v.guaranteed = false;
      v.note = "no Lipschitz constant known for Huber projections";
      break;
  }
  return v;
}

TargetVector affine_extension(const TargetVector& y, const TargetVector& yhat, double alpha) {
  if (y.size() != yhat.size()) throw std::invalid_argument("affine_extension: dimension mismatch");
  return (1.0 - alpha) * y + alpha * yhat;
}

double alpha_convert(double alpha_a) {
  if (!(alpha_a > 0.0 && alpha_a <= 1.0))
    throw std::invalid_argument("alpha_convert: alpha_a must lie in (0, 1]; alpha_a = 0 gives an infinite alpha_m");
  // (1 - a) / a rounds once; 1 / a - 1 rounds twice.
  return (1.0 - alpha_a) / alpha_a;
}

double residual_norm(const LossSpec& loss, const TargetVector& v) {
  return loss.kind == LossKind::MAE ? v.lpNorm<1>() : v.norm();
}

namespace {

IterationHistory run_loop(const RunConfig& cfg, const Dataset& train, const Dataset& test, Algorithm algorithm) {
  cfg.validate();
  const auto& constraints = cfg.constraints;
  if (constraints->n() != train.n())
    throw std::invalid_argument("constraint set dimension " + std::to_string(constraints->n()) +
                                " differs from training rows " + std::to_string(train.n()));
  const bool has_test = test.n() > 0;

  IterationHistory history;
  history.algorithm = algorithm;
  history.alpha = cfg.alpha;
  history.alpha_m = algorithm == Algorithm::MovingTargets ? cfg.moving_targets_weight() : kNaN;
  history.beta = cfg.beta;
  history.loss = cfg.loss;
  history.learner = cfg.learner.kind;
  history.verdict = check_contraction_condition(cfg.loss, cfg.alpha);
  history.y_train_didi = label_didi(train);
  history.y_test_didi = has_test ? label_didi(test) : 0.0;

  auto model = range_projection_fit(cfg.learner, train.X, train.y, cfg.loss);
  TargetVector yhat = model.predict(train.X);
  history.initial_prediction = yhat;
  history.initial_r2_train = safe_r2(train.y, yhat);
  history.initial_c_train = safe_c(yhat, train.protected_features, history.y_train_didi);
  if (has_test) {
    const TargetVector pt = model.predict(test.X);
    history.initial_r2_test = safe_r2(test.y, pt);
    history.initial_c_test = safe_c(pt, test.protected_features, history.y_test_didi);
  } else {
    history.initial_r2_test = kNaN;
    history.initial_c_test = kNaN;
  }

  std::optional<TargetVector> warm;
  double previous_residual = kNaN;
  for (int i = 1; i <= cfg.iterations; ++i) {
    IterationRecord rec;
    rec.iteration = i;
    SolverReport report;
    if (!is_member(*constraints, yhat, cfg.membership_tolerance)) {
      rec.branch = Branch::Infeasible;
      ProjectionProblem problem;
      problem.loss = cfg.loss;
      problem.constraints = constraints;
      problem.initial_guess = warm;
      if (algorithm == Algorithm::AffineExtension) {
        problem.anchor = affine_extension(train.y, yhat, cfg.alpha);
      } else {
        problem.anchor = train.y;
        problem.extra_terms.push_back(WeightedAnchor{1.0 / cfg.moving_targets_weight(), yhat});
      }
      report = project(problem, cfg.solver);
    } else {
      rec.branch = Branch::Feasible;
      bool fallback = false;
      try {
        report = project_ball_intersection(cfg.loss, train.y, yhat, cfg.beta, constraints, cfg.solver, warm);
        fallback = !report.converged && !is_member(*constraints, report.solution, cfg.membership_tolerance);
      } catch (const InfeasibleError&) {
        fallback = true;
      }
      if (fallback) {
        report.solution = yhat;
        rec.solve.fallback = true;
      }
    }
    if (!report.converged && !rec.solve.fallback && cfg.fail_hard)
      throw std::runtime_error("adjustment solve did not converge at iteration " + std::to_string(i));

    rec.solve.iterations = report.iterations;
    rec.solve.primal_residual = report.primal_residual;
    rec.solve.dual_residual = report.dual_residual;
    rec.solve.converged = report.converged;
    rec.solve.polished = report.polished;

    model = range_projection_fit(cfg.learner, train.X, report.solution, cfg.loss);
    TargetVector next = model.predict(train.X);
    rec.residual = residual_norm(cfg.loss, next - yhat);
    rec.contraction_ratio = previous_residual > 0.0 ? rec.residual / previous_residual : kNaN;
    rec.r2_train = safe_r2(train.y, next);
    rec.c_train = safe_c(next, train.protected_features, history.y_train_didi);
    if (has_test) {
      TargetVector pt = model.predict(test.X);
      rec.r2_test = safe_r2(test.y, pt);
      rec.c_test = safe_c(pt, test.protected_features, history.y_test_didi);
      if (cfg.keep_vectors) rec.prediction_test = std::move(pt);
    } else {
      rec.r2_test = kNaN;
      rec.c_test = kNaN;
    }

    previous_residual = rec.residual;
    warm = report.solution;
    yhat = std::move(next);
    if (cfg.keep_vectors) {
      rec.z = report.solution;
      rec.prediction = yhat;
    }
    const bool stop = cfg.early_stop && rec.residual < cfg.stop_tolerance;
    history.records.push_back(std::move(rec));
    if (stop) {
      history.early_stopped = true;
      break;
    }
  }
  return history;
}

}  // namespace

IterationHistory run_affine_extension(const RunConfig& config, const Dataset& train, const Dataset& test) {
  return run_loop(config, train, test, Algorithm::AffineExtension);
}

IterationHistory run_moving_targets(const RunConfig& config, const Dataset& train, const Dataset& test) {
  return run_loop(config, train, test, Algorithm::MovingTargets);
}

IterationHistory run(const RunConfig& config, const Dataset& train, const Dataset& test) {
  return run_loop(config, train, test, config.algorithm);
}

}  // namespace confit
