// Internal: nonemptiness probe shared by the constraint builders.
#ifndef CONFIT_SRC_FEASIBILITY_HPP_
#define CONFIT_SRC_FEASIBILITY_HPP_

#include <cstddef>
#include <optional>

#include <Eigen/Core>

namespace confit::detail {

/// Euclidean projection of `hint` onto the system, with the first
/// `fixed_prefix` coordinates pinned to their hint values. Returns a point
/// violating no row by more than `tol`, or nullopt.
std::optional<Eigen::VectorXd> find_feasible_point(const Eigen::MatrixXd& A_ineq, const Eigen::VectorXd& b_ineq,
                                                   const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                                                   const Eigen::VectorXd& hint, std::size_t fixed_prefix,
                                                   double tol = 1e-9);

}  // namespace confit::detail

#endif  // CONFIT_SRC_FEASIBILITY_HPP_
