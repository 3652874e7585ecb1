#ifndef CONFIT_CONSTRAINTS_HPP_
#define CONFIT_CONSTRAINTS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "confit/data.hpp"
#include "confit/losses.hpp"

namespace confit {

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError() : std::runtime_error("infeasible constraint set") {}
  explicit InfeasibleError(const std::string& detail) : std::runtime_error("infeasible constraint set: " + detail) {}
};

enum class Provenance { DIDI, Box, Custom };

std::string to_string(Provenance p);

/// Analytic auxiliary values: one absolute group-mean gap per (feature, group),
/// in the order the DIDI builder emits them.
struct AuxRule {
  enum class Kind { None, DidiGaps } kind = Kind::None;
  std::vector<ProtectedSpec> groups;
  std::size_t count = 0;
};

/// Convex set { z : exists aux, A_ineq (z, aux) <= b_ineq, A_eq (z, aux) = b_eq }.
///
/// Immutable after construction; the constructor functions verify
/// nonemptiness and keep the feasible point they found as `witness`.
class ConstraintSet {
 public:
  /// Arbitrary linear system. Throws InfeasibleError when no feasible point is found.
  static ConstraintSet custom(Eigen::MatrixXd A_ineq, Eigen::VectorXd b_ineq, Eigen::MatrixXd A_eq,
                              Eigen::VectorXd b_eq, std::size_t n, std::size_t n_aux);

  /// The whole space (no rows).
  static ConstraintSet unconstrained(std::size_t n);

  const Eigen::MatrixXd& A_ineq() const { return A_ineq_; }
  const Eigen::VectorXd& b_ineq() const { return b_ineq_; }
  const Eigen::MatrixXd& A_eq() const { return A_eq_; }
  const Eigen::VectorXd& b_eq() const { return b_eq_; }
  std::size_t n() const { return n_; }
  std::size_t n_aux() const { return n_aux_; }
  std::size_t width() const { return n_ + n_aux_; }
  const std::vector<Provenance>& provenance() const { return provenance_; }
  const std::vector<AuxRule>& aux_rules() const { return aux_rules_; }
  /// A feasible extended point (z, aux).
  const Eigen::VectorXd& witness() const { return witness_; }

  /// Analytic auxiliaries for z, when every aux block has a rule.
  bool has_aux_rule() const;
  Eigen::VectorXd aux_for(const TargetVector& z) const;

  /// Largest violation over all rows at the extended point x.
  double max_violation(const Eigen::VectorXd& x) const;

 private:
  friend ConstraintSet build_didi_constraints(const std::vector<ProtectedSpec>&, double, std::size_t);
  friend ConstraintSet build_box(double, double, std::size_t);
  friend ConstraintSet intersect(const ConstraintSet&, const ConstraintSet&);

  ConstraintSet() = default;

  Eigen::MatrixXd A_ineq_;
  Eigen::VectorXd b_ineq_;
  Eigen::MatrixXd A_eq_;
  Eigen::VectorXd b_eq_;
  std::size_t n_ = 0;
  std::size_t n_aux_ = 0;
  std::vector<Provenance> provenance_;
  std::vector<AuxRule> aux_rules_;
  Eigen::VectorXd witness_;
};

struct DidiSpec {
  std::vector<ProtectedSpec> protected_features;
  double epsilon = 0.0;
  double fraction = 0.2;
};

/// Sum over features p and groups v of |mean(z) - mean of z over group (p,v)|.
double didi_value(const TargetVector& z, const std::vector<ProtectedSpec>& protected_features);

/// epsilon = fraction * didi_value(y).
double didi_epsilon(const TargetVector& y, const std::vector<ProtectedSpec>& protected_features, double fraction);

/// One auxiliary u per (feature, group) with u >= +-(mean(z) - group mean) and
/// sum(u) <= epsilon.
ConstraintSet build_didi_constraints(const std::vector<ProtectedSpec>& protected_features, double epsilon,
                                     std::size_t n);

ConstraintSet build_box(double lower, double upper, std::size_t n);

/// Stacked rows; auxiliaries of `a` come first. Throws InfeasibleError.
ConstraintSet intersect(const ConstraintSet& a, const ConstraintSet& b);

constexpr double kMembershipTolerance = 1e-6;

bool is_member(const ConstraintSet& c, const TargetVector& z, double tol = kMembershipTolerance);

}  // namespace confit

#endif  // CONFIT_CONSTRAINTS_HPP_
