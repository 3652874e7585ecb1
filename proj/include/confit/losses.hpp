#ifndef CONFIT_LOSSES_HPP_
#define CONFIT_LOSSES_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace confit {

using TargetVector = Eigen::VectorXd;

enum class LossKind { MSE, MAE, Huber };

/// Loss selector. `huber_threshold` is only read for Huber.
struct LossSpec {
  LossKind kind = LossKind::MSE;
  double huber_threshold = 0.1;

  static LossSpec mse() { return {LossKind::MSE, 0.1}; }
  static LossSpec mae() { return {LossKind::MAE, 0.1}; }
  static LossSpec huber(double m = 0.1);

  void validate() const;
  bool operator==(const LossSpec&) const = default;
};

std::string to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// Pointwise penalty g(x): x^2, |x| or the Huber function with threshold M.
double penalty(const LossSpec& spec, double x);

/// One-sided derivatives of g at x.
double penalty_left_derivative(const LossSpec& spec, double x);
double penalty_right_derivative(const LossSpec& spec, double x);

/// (1/n) * sum_k g(z_k - y_k).
double loss(const LossSpec& spec, const TargetVector& z, const TargetVector& y);

/// Pointwise argmin_z g(z - anchor)/n_scale + (z - v)^2 / (2t).
///
/// `n_scale` is the loss normalization n' (the 1/n inside the loss). The
/// solver calls this with n_scale = 1 after factoring n out of the objective.
double prox_scalar(const LossSpec& spec, double t, double v, double anchor, double n_scale);

/// Vector form of prox_scalar with n_scale = dimension of v.
TargetVector prox(const LossSpec& spec, double t, const TargetVector& v,
                  const TargetVector& anchor);

/// A weighted penalty w * g(z - anchor) acting on one coordinate.
struct ScalarTerm {
  double weight;
  double anchor;
};

/// Sum of weighted penalties sharing one LossSpec, seen as a function of one
/// scalar. Convex; piecewise quadratic with breakpoints at the anchors (MAE)
/// or at anchor +/- M (Huber).
class ScalarObjective {
 public:
  ScalarObjective(LossSpec spec, std::span<const ScalarTerm> terms);

  double value(double z) const;
  double left_derivative(double z) const;
  double right_derivative(double z) const;

  /// Sorted, deduplicated breakpoints.
  const std::vector<double>& breakpoints() const { return breaks_; }

  /// Curvature h and offset q such that the derivative is h*z + q on the
  /// open interval containing `probe` (probe must not be a breakpoint).
  void local_model(double probe, double& h, double& q) const;

  /// argmin_z value(z) + (z - v)^2 / (2t). t may be +infinity, in which case
  /// the midpoint of the minimizing interval is returned.
  double prox(double t, double v) const;

 private:
  LossSpec spec_;
  std::vector<ScalarTerm> terms_;
  std::vector<double> breaks_;
};

}  // namespace confit

#endif  // CONFIT_LOSSES_HPP_
