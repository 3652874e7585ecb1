#ifndef CONFIT_DRIVER_HPP_
#define CONFIT_DRIVER_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "confit/constraints.hpp"
#include "confit/data.hpp"
#include "confit/learners.hpp"
#include "confit/losses.hpp"
#include "confit/solver.hpp"

namespace confit {

enum class Algorithm { AffineExtension, MovingTargets };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

enum class Branch { Infeasible, Feasible };

std::string to_string(Branch branch);
Branch parse_branch(std::string_view name);

struct RunConfig {
  Algorithm algorithm = Algorithm::AffineExtension;
  /// Weight on the prediction in h = (1 - alpha) y + alpha yhat.
  double alpha = 0.5;
  /// Moving Targets weight; defaults to alpha_convert(alpha).
  std::optional<double> alpha_m;
  /// Trust radius in loss units.
  double beta = 0.1;
  int iterations = 30;
  LossSpec loss;
  LearnerSpec learner;
  std::shared_ptr<const ConstraintSet> constraints;
  double membership_tolerance = kMembershipTolerance;
  std::uint64_t seed = 0;
  bool early_stop = false;
  double stop_tolerance = 1e-8;
  /// Throw on solver non-convergence instead of flagging the iteration.
  bool fail_hard = false;
  SolverOptions solver;
  /// Keep z and predictions in every record.
  bool keep_vectors = true;

  void validate() const;
  double moving_targets_weight() const;
};

struct SolveSummary {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = true;
  bool polished = false;
  /// The ball solve failed and z fell back to the current prediction.
  bool fallback = false;
};

/// Quantities after iteration i: z^i, the refit predictions yhat^{i+1} and
/// ||yhat^{i+1} - yhat^i||. Undefined metrics are NaN.
struct IterationRecord {
  int iteration = 0;
  Branch branch = Branch::Infeasible;
  TargetVector z;
  TargetVector prediction;
  TargetVector prediction_test;
  double r2_train = 0.0;
  double r2_test = 0.0;
  double c_train = 0.0;
  double c_test = 0.0;
  double residual = 0.0;
  double contraction_ratio = 0.0;
  SolveSummary solve;
};

struct ContractionVerdict {
  bool guaranteed = false;
  /// Largest admissible alpha, when known.
  std::optional<double> bound;
  std::string note;

  std::string label() const { return guaranteed ? "guaranteed" : "not-guaranteed"; }
};

/// MSE: alpha < 1. MAE: alpha < 0.25. Huber: no known constant.
ContractionVerdict check_contraction_condition(const LossSpec& loss, double alpha);

struct IterationHistory {
  Algorithm algorithm = Algorithm::AffineExtension;
  double alpha = 0.0;
  double alpha_m = 0.0;
  double beta = 0.0;
  LossSpec loss;
  LearnerKind learner = LearnerKind::Ridge;
  ContractionVerdict verdict;
  double y_train_didi = 0.0;
  double y_test_didi = 0.0;
  /// Metrics of the initial unconstrained fit.
  TargetVector initial_prediction;
  double initial_r2_train = 0.0;
  double initial_r2_test = 0.0;
  double initial_c_train = 0.0;
  double initial_c_test = 0.0;
  std::vector<IterationRecord> records;
  bool early_stopped = false;

  std::size_t branch_count(Branch branch) const;
};

/// h = (1 - alpha) y + alpha yhat.
TargetVector affine_extension(const TargetVector& y, const TargetVector& yhat, double alpha);

/// alpha_m = 1 / alpha_a - 1. Throws for alpha_a outside (0, 1].
double alpha_convert(double alpha_a);

IterationHistory run_affine_extension(const RunConfig& config, const Dataset& train, const Dataset& test);
IterationHistory run_moving_targets(const RunConfig& config, const Dataset& train, const Dataset& test);

/// Dispatches on config.algorithm.
IterationHistory run(const RunConfig& config, const Dataset& train, const Dataset& test);

/// Residual norm used by the diagnostics: L1 for MAE, L2 otherwise.
double residual_norm(const LossSpec& loss, const TargetVector& v);

}  // namespace confit

#endif  // CONFIT_DRIVER_HPP_
