#include "confit/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "feasibility.hpp"

namespace confit {

namespace {

// Row residual a.x - b evaluated in index order.
double row_value(const Eigen::MatrixXd& A, Eigen::Index i, const Eigen::VectorXd& x) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < A.cols(); ++k) s += A(i, k) * x[k];
  return s;
}

std::size_t total_groups(const std::vector<ProtectedSpec>& protected_features) {
  std::size_t count = 0;
  for (const auto& p : protected_features) count += p.groups.size();
  return count;
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::DIDI: return "didi";
    case Provenance::Box: return "box";
    case Provenance::Custom: return "custom";
  }
  return "unknown";
}

double didi_value(const TargetVector& z, const std::vector<ProtectedSpec>& protected_features) {
  const auto n = static_cast<std::size_t>(z.size());
  if (n == 0) throw std::invalid_argument("didi_value: empty vector");
  double mean = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) mean += z[i];
  mean /= static_cast<double>(n);
  double total = 0.0;
  for (const auto& feature : protected_features) {
    for (const auto& [value, rows] : feature.groups) {
      if (rows.empty()) throw std::invalid_argument("didi_value: empty protected group");
      double group_sum = 0.0;
      for (std::size_t r : rows) {
        if (r >= n) throw std::invalid_argument("didi_value: group row index out of range");
        group_sum += z[static_cast<Eigen::Index>(r)];
      }
      total += std::abs(mean - group_sum / static_cast<double>(rows.size()));
    }
  }
  return total;
}

double didi_epsilon(const TargetVector& y, const std::vector<ProtectedSpec>& protected_features, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("DIDI fraction must lie in (0, 1]");
  return fraction * didi_value(y, protected_features);
}

bool ConstraintSet::has_aux_rule() const {
  std::size_t covered = 0;
  for (const auto& rule : aux_rules_) {
    if (rule.kind == AuxRule::Kind::None && rule.count > 0) return false;
    if (rule.kind == AuxRule::Kind::DidiGaps) covered += rule.count;
  }
  return covered == n_aux_;
}

Eigen::VectorXd ConstraintSet::aux_for(const TargetVector& z) const {
  Eigen::VectorXd aux(static_cast<Eigen::Index>(n_aux_));
  Eigen::Index next = 0;
  for (const auto& rule : aux_rules_) {
    if (rule.kind != AuxRule::Kind::DidiGaps) continue;
    double mean = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) mean += z[i];
    mean /= static_cast<double>(z.size());
    for (const auto& feature : rule.groups) {
      for (const auto& [value, rows] : feature.groups) {
        double group_sum = 0.0;
        for (std::size_t r : rows) group_sum += z[static_cast<Eigen::Index>(r)];
        aux[next++] = std::abs(mean - group_sum / static_cast<double>(rows.size()));
      }
    }
  }
  return aux;
}

double ConstraintSet::max_violation(const Eigen::VectorXd& x) const {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < A_ineq_.rows(); ++i) worst = std::max(worst, row_value(A_ineq_, i, x) - b_ineq_[i]);
  for (Eigen::Index i = 0; i < A_eq_.rows(); ++i) worst = std::max(worst, std::abs(row_value(A_eq_, i, x) - b_eq_[i]));
  return worst;
}

ConstraintSet ConstraintSet::custom(Eigen::MatrixXd A_ineq, Eigen::VectorXd b_ineq, Eigen::MatrixXd A_eq,
                                    Eigen::VectorXd b_eq, std::size_t n, std::size_t n_aux) {
  const auto width = static_cast<Eigen::Index>(n + n_aux);
  if (A_ineq.rows() == 0) A_ineq.resize(0, width);
  if (A_eq.rows() == 0) A_eq.resize(0, width);
  if (A_ineq.cols() != width || A_eq.cols() != width)
    throw std::invalid_argument("constraint matrices must have n + n_aux columns");
  if (A_ineq.rows() != b_ineq.size() || A_eq.rows() != b_eq.size())
    throw std::invalid_argument("constraint matrix and bound vector sizes differ");
  ConstraintSet cs;
  cs.A_ineq_ = std::move(A_ineq);
  cs.b_ineq_ = std::move(b_ineq);
  cs.A_eq_ = std::move(A_eq);
  cs.b_eq_ = std::move(b_eq);
  cs.n_ = n;
  cs.n_aux_ = n_aux;
  cs.provenance_ = {Provenance::Custom};
  cs.aux_rules_ = {AuxRule{AuxRule::Kind::None, {}, n_aux}};
  auto point = detail::find_feasible_point(cs.A_ineq_, cs.b_ineq_, cs.A_eq_, cs.b_eq_,
                                           Eigen::VectorXd::Zero(width), 0);
  if (!point) throw InfeasibleError();
  cs.witness_ = *point;
  return cs;
}

ConstraintSet ConstraintSet::unconstrained(std::size_t n) {
  ConstraintSet cs;
  cs.A_ineq_.resize(0, static_cast<Eigen::Index>(n));
  cs.b_ineq_.resize(0);
  cs.A_eq_.resize(0, static_cast<Eigen::Index>(n));
  cs.b_eq_.resize(0);
  cs.n_ = n;
  cs.provenance_ = {Provenance::Custom};
  cs.witness_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  return cs;
}

ConstraintSet build_didi_constraints(const std::vector<ProtectedSpec>& protected_features, double epsilon,
                                     std::size_t n) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("DIDI epsilon must be nonnegative");
  const std::size_t groups = total_groups(protected_features);
  const auto width = static_cast<Eigen::Index>(n + groups);
  ConstraintSet cs;
  cs.n_ = n;
  cs.n_aux_ = groups;
  cs.A_ineq_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * groups + 1), width);
  cs.b_ineq_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * groups + 1));
  cs.A_eq_.resize(0, width);
  cs.b_eq_.resize(0);

  Eigen::Index row = 0;
  Eigen::Index aux = static_cast<Eigen::Index>(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (const auto& feature : protected_features) {
    for (const auto& [value, rows] : feature.groups) {
      if (rows.empty()) throw std::invalid_argument("DIDI: empty protected group");
      // gap(z) = mean(z) - group mean(z) = a . z
      Eigen::VectorXd a = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), inv_n);
      const double inv_g = 1.0 / static_cast<double>(rows.size());
      for (std::size_t r : rows) {
        if (r >= n) throw std::invalid_argument("DIDI: group row index out of range");
        a[static_cast<Eigen::Index>(r)] -= inv_g;
      }
      cs.A_ineq_.row(row).head(static_cast<Eigen::Index>(n)) = a.transpose();
      cs.A_ineq_(row, aux) = -1.0;
      ++row;
      cs.A_ineq_.row(row).head(static_cast<Eigen::Index>(n)) = -a.transpose();
      cs.A_ineq_(row, aux) = -1.0;
      ++row;
      ++aux;
    }
  }
  cs.A_ineq_.row(row).tail(static_cast<Eigen::Index>(groups)).setOnes();
  cs.b_ineq_[row] = epsilon;

  cs.provenance_ = {Provenance::DIDI};
  cs.aux_rules_ = {AuxRule{AuxRule::Kind::DidiGaps, protected_features, groups}};
  // Constant targets have zero DIDI.
  cs.witness_ = Eigen::VectorXd::Zero(width);
  return cs;
}

ConstraintSet build_box(double lower, double upper, std::size_t n) {
  if (!(lower <= upper)) throw std::invalid_argument("box: lower bound exceeds upper bound");
  const auto dim = static_cast<Eigen::Index>(n);
  ConstraintSet cs;
  cs.n_ = n;
  cs.A_ineq_ = Eigen::MatrixXd::Zero(2 * dim, dim);
  cs.b_ineq_.resize(2 * dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    cs.A_ineq_(2 * k, k) = 1.0;
    cs.b_ineq_[2 * k] = upper;
    cs.A_ineq_(2 * k + 1, k) = -1.0;
    cs.b_ineq_[2 * k + 1] = -lower;
  }
  cs.A_eq_.resize(0, dim);
  cs.b_eq_.resize(0);
  cs.provenance_ = {Provenance::Box};
  cs.aux_rules_ = {AuxRule{AuxRule::Kind::None, {}, 0}};
  cs.witness_ = Eigen::VectorXd::Constant(dim, lower);
  return cs;
}

namespace {

// Re-embeds a matrix over (z, aux_a) or (z, aux_b) into (z, aux_a, aux_b).
Eigen::MatrixXd embed(const Eigen::MatrixXd& M, std::size_t n, std::size_t aux_offset, std::size_t total_aux) {
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(M.rows(), nn + static_cast<Eigen::Index>(total_aux));
  out.leftCols(nn) = M.leftCols(nn);
  const Eigen::Index aux = M.cols() - nn;
  if (aux > 0) out.block(0, nn + static_cast<Eigen::Index>(aux_offset), M.rows(), aux) = M.rightCols(aux);
  return out;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

Eigen::VectorXd stack(const Eigen::VectorXd& top, const Eigen::VectorXd& bottom) {
  Eigen::VectorXd out(top.size() + bottom.size());
  out << top, bottom;
  return out;
}

}  // namespace

ConstraintSet intersect(const ConstraintSet& a, const ConstraintSet& b) {
  if (a.n() != b.n()) throw std::invalid_argument("intersect: dimension mismatch");
  const std::size_t n = a.n();
  const std::size_t total_aux = a.n_aux() + b.n_aux();
  ConstraintSet cs;
  cs.n_ = n;
  cs.n_aux_ = total_aux;
  cs.A_ineq_ = stack(embed(a.A_ineq(), n, 0, total_aux), embed(b.A_ineq(), n, a.n_aux(), total_aux));
  cs.b_ineq_ = stack(a.b_ineq(), b.b_ineq());
  cs.A_eq_ = stack(embed(a.A_eq(), n, 0, total_aux), embed(b.A_eq(), n, a.n_aux(), total_aux));
  cs.b_eq_ = stack(a.b_eq(), b.b_eq());
  cs.provenance_ = a.provenance();
  cs.provenance_.insert(cs.provenance_.end(), b.provenance().begin(), b.provenance().end());
  cs.aux_rules_ = a.aux_rules();
  cs.aux_rules_.insert(cs.aux_rules_.end(), b.aux_rules().begin(), b.aux_rules().end());

  // Try the operands' witnesses before running the solver.
  const auto nn = static_cast<Eigen::Index>(n);
  if (cs.has_aux_rule()) {
    for (const auto* source : {&a, &b}) {
      Eigen::VectorXd x(nn + static_cast<Eigen::Index>(total_aux));
      const TargetVector z = source->witness().head(nn);
      x << z, cs.aux_for(z);
      if (cs.max_violation(x) <= 1e-12) {
        cs.witness_ = x;
        return cs;
      }
    }
  }
  Eigen::VectorXd hint = Eigen::VectorXd::Zero(nn + static_cast<Eigen::Index>(total_aux));
  hint.head(nn) = a.witness().head(nn);
  auto point = detail::find_feasible_point(cs.A_ineq_, cs.b_ineq_, cs.A_eq_, cs.b_eq_, hint, 0);
  if (!point) throw InfeasibleError();
  cs.witness_ = *point;
  return cs;
}

bool is_member(const ConstraintSet& c, const TargetVector& z, double tol) {
  if (static_cast<std::size_t>(z.size()) != c.n()) throw std::invalid_argument("is_member: dimension mismatch");
  const auto nn = static_cast<Eigen::Index>(c.n());
  Eigen::VectorXd x(static_cast<Eigen::Index>(c.width()));
  if (c.n_aux() == 0) {
    x = z;
  } else if (c.has_aux_rule()) {
    x << z, c.aux_for(z);
  } else {
    Eigen::VectorXd hint = c.witness();
    hint.head(nn) = z;
    auto point = detail::find_feasible_point(c.A_ineq(), c.b_ineq(), c.A_eq(), c.b_eq(), hint, c.n(), tol);
    if (!point) return false;
    x = *point;
  }
  return c.max_violation(x) <= tol;
}

}  // namespace confit
