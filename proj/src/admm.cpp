#include "admm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace confit::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPresolveTol = 1e-12;
// Residual below which the active-set polish is attempted.
constexpr double kPolishGate = 1e-3;

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

const std::vector<double> kNoBreaks;

// Active-set refinement of a splitting iterate. Guesses which bounds, rows and
// breakpoints are active at x0, solves the resulting equality-constrained
// quadratic model exactly, and accepts the point only if it satisfies every
// KKT condition of the original problem.
class Polisher {
 public:
  Polisher(const Polyhedron& poly, const std::vector<ScalarObjective>& objective)
      : poly_(poly), objective_(objective), n_(poly.width()), m_(poly.rows()) {}

  bool run(const Eigen::VectorXd& x0, double act_tol, AdmmResult& out) {
    init_states(x0, act_tol);
    Eigen::VectorXd x = x0;
    for (int round = 0; round < kMaxRounds; ++round) {
      Eigen::VectorXd nu;
      if (!solve_kkt(x, nu)) return false;
      double stationarity = 0.0;
      if (!update_states(x, nu, stationarity)) {
        const double violation = poly_.max_violation(x);
        if (stationarity > kDualTol * 10.0 || violation > kPrimalTol * 10.0) return false;
        out.x = x;
        out.primal_residual = violation;
        out.dual_residual = stationarity;
        out.polished = true;
        return true;
      }
    }
    return false;
  }

 private:
  static constexpr int kMaxRounds = 40;
  static constexpr int kRefinements = 20;
  static constexpr double kReg = 1e-7;
  static constexpr double kPrimalTol = 1e-10;
  static constexpr double kDualTol = 1e-9;

  enum class Row { Inactive, Lower, Upper, Equal };

  const std::vector<double>& breaks(Eigen::Index k) const {
    return k < static_cast<Eigen::Index>(objective_.size()) ? objective_[static_cast<std::size_t>(k)].breakpoints()
                                                            : kNoBreaks;
  }

  void set_free(Eigen::Index k, double lo, double hi) {
    fixed_[k] = false;
    region_lo_[k] = lo;
    region_hi_[k] = hi;
  }

  void set_fixed(Eigen::Index k, double value) {
    fixed_[k] = true;
    fixed_value_[k] = value;
  }

  // Free region (previous breakpoint, next breakpoint) around x.
  void free_around(Eigen::Index k, double x) {
    const auto& b = breaks(k);
    const auto it = std::upper_bound(b.begin(), b.end(), x);
    const double hi = it == b.end() ? kInf : *it;
    auto lo_it = std::lower_bound(b.begin(), b.end(), x);
    const double lo = lo_it == b.begin() ? -kInf : *(lo_it - 1);
    set_free(k, lo, hi);
  }

  void init_states(const Eigen::VectorXd& x0, double act_tol) {
    fixed_.assign(static_cast<std::size_t>(n_), false);
    fixed_value_ = Eigen::VectorXd::Zero(n_);
    region_lo_ = Eigen::VectorXd::Constant(n_, -kInf);
    region_hi_ = Eigen::VectorXd::Constant(n_, kInf);
    for (Eigen::Index k = 0; k < n_; ++k) {
      const double v = x0[k];
      if (poly_.lo[k] == poly_.hi[k] || v - poly_.lo[k] <= act_tol) {
        set_fixed(k, poly_.lo[k]);
        continue;
      }
      if (poly_.hi[k] - v <= act_tol) {
        set_fixed(k, poly_.hi[k]);
        continue;
      }
      const auto& b = breaks(k);
      const auto it = std::lower_bound(b.begin(), b.end(), v - act_tol);
      if (it != b.end() && *it <= v + act_tol) {
        set_fixed(k, *it);
        continue;
      }
      free_around(k, v);
    }
    rows_.assign(static_cast<std::size_t>(m_), Row::Inactive);
    const Eigen::VectorXd ax = poly_.A * x0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      auto& state = rows_[static_cast<std::size_t>(i)];
      if (poly_.l[i] == poly_.u[i]) state = Row::Equal;
      else if (ax[i] - poly_.l[i] <= act_tol) state = Row::Lower;
      else if (poly_.u[i] - ax[i] <= act_tol) state = Row::Upper;
    }
  }

  // Solves the equality-constrained model for the current working sets,
  // starting from x (which also receives the result).
  bool solve_kkt(Eigen::VectorXd& x, Eigen::VectorXd& nu) {
    std::vector<Eigen::Index> free_vars, active_rows;
    for (Eigen::Index k = 0; k < n_; ++k)
      if (!fixed_[static_cast<std::size_t>(k)]) free_vars.push_back(k);
    for (Eigen::Index i = 0; i < m_; ++i)
      if (rows_[static_cast<std::size_t>(i)] != Row::Inactive) active_rows.push_back(i);
    const auto nv = static_cast<Eigen::Index>(free_vars.size());
    const auto nr = static_cast<Eigen::Index>(active_rows.size());

    for (Eigen::Index k = 0; k < n_; ++k)
      if (fixed_[static_cast<std::size_t>(k)]) x[k] = fixed_value_[k];

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nv + nr, nv + nr);
    Eigen::VectorXd rhs(nv + nr);
    for (Eigen::Index j = 0; j < nv; ++j) {
      const Eigen::Index k = free_vars[static_cast<std::size_t>(j)];
      double h = 0.0, q = 0.0;
      if (k < static_cast<Eigen::Index>(objective_.size())) {
        const double lo = region_lo_[k], hi = region_hi_[k];
        double probe;
        if (std::isinf(lo) && std::isinf(hi)) probe = x[k];
        else if (std::isinf(lo)) probe = hi - 1.0;
        else if (std::isinf(hi)) probe = lo + 1.0;
        else probe = 0.5 * (lo + hi);
        objective_[static_cast<std::size_t>(k)].local_model(probe, h, q);
      }
      kkt(j, j) = h;
      rhs[j] = -q;
    }
    for (Eigen::Index r = 0; r < nr; ++r) {
      const Eigen::Index i = active_rows[static_cast<std::size_t>(r)];
      const Row state = rows_[static_cast<std::size_t>(i)];
      double target = state == Row::Lower ? poly_.l[i] : poly_.u[i];
      for (Eigen::Index k = 0; k < n_; ++k)
        if (fixed_[static_cast<std::size_t>(k)]) target -= poly_.A(i, k) * fixed_value_[k];
      for (Eigen::Index j = 0; j < nv; ++j) {
        const double a = poly_.A(i, free_vars[static_cast<std::size_t>(j)]);
        kkt(nv + r, j) = a;
        kkt(j, nv + r) = a;
      }
      rhs[nv + r] = target;
    }

    Eigen::MatrixXd regularized = kkt;
    for (Eigen::Index j = 0; j < nv; ++j) regularized(j, j) += kReg;
    for (Eigen::Index r = 0; r < nr; ++r) regularized(nv + r, nv + r) -= kReg;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(regularized);

    Eigen::VectorXd sol = Eigen::VectorXd::Zero(nv + nr);
    for (Eigen::Index j = 0; j < nv; ++j) sol[j] = x[free_vars[static_cast<std::size_t>(j)]];
    for (int it = 0; it < kRefinements; ++it) {
      const Eigen::VectorXd residual = rhs - kkt * sol;
      if (inf_norm(residual) <= 1e-15) break;
      sol += lu.solve(residual);
    }
    if (!sol.allFinite()) return false;

    for (Eigen::Index j = 0; j < nv; ++j) x[free_vars[static_cast<std::size_t>(j)]] = sol[j];
    nu = Eigen::VectorXd::Zero(m_);
    for (Eigen::Index r = 0; r < nr; ++r) nu[active_rows[static_cast<std::size_t>(r)]] = sol[nv + r];
    return true;
  }

  // Returns true when any working set changed. Also reports the stationarity
  // violation over free variables.
  bool update_states(const Eigen::VectorXd& x, const Eigen::VectorXd& nu, double& stationarity) {
    bool changed = false;
    const Eigen::VectorXd g = poly_.A.transpose() * nu;
    stationarity = 0.0;

    for (Eigen::Index k = 0; k < n_; ++k) {
      const bool has_obj = k < static_cast<Eigen::Index>(objective_.size());
      const double lo = poly_.lo[k], hi = poly_.hi[k];
      if (!fixed_[static_cast<std::size_t>(k)]) {
        const double lower_end = std::max(region_lo_[k], lo);
        const double upper_end = std::min(region_hi_[k], hi);
        if (x[k] < lower_end - kPrimalTol) {
          set_fixed(k, lower_end);
          changed = true;
        } else if (x[k] > upper_end + kPrimalTol) {
          set_fixed(k, upper_end);
          changed = true;
        } else {
          double d = g[k];
          if (has_obj) d += objective_[static_cast<std::size_t>(k)].right_derivative(std::clamp(x[k], lower_end, upper_end));
          // On the interior of a smooth region left and right derivatives agree.
          stationarity = std::max(stationarity, std::abs(d));
        }
        continue;
      }
      const double p = fixed_value_[k];
      const double dl = (has_obj ? objective_[static_cast<std::size_t>(k)].left_derivative(p) : 0.0) + g[k];
      const double dr = (has_obj ? objective_[static_cast<std::size_t>(k)].right_derivative(p) : 0.0) + g[k];
      const bool can_go_left = p > lo;
      const bool can_go_right = p < hi;
      if (can_go_left && dl > kDualTol) {
        const auto& b = breaks(k);
        const auto it = std::lower_bound(b.begin(), b.end(), p);
        set_free(k, it == b.begin() ? -kInf : *(it - 1), p);
        changed = true;
      } else if (can_go_right && dr < -kDualTol) {
        const auto& b = breaks(k);
        const auto it = std::upper_bound(b.begin(), b.end(), p);
        set_free(k, p, it == b.end() ? kInf : *it);
        changed = true;
      }
    }

    const Eigen::VectorXd ax = poly_.A * x;
    for (Eigen::Index i = 0; i < m_; ++i) {
      auto& state = rows_[static_cast<std::size_t>(i)];
      switch (state) {
        case Row::Equal: break;
        case Row::Lower:
          if (nu[i] > kDualTol) {
            state = Row::Inactive;
            changed = true;
          }
          break;
        case Row::Upper:
          if (nu[i] < -kDualTol) {
            state = Row::Inactive;
            changed = true;
          }
          break;
        case Row::Inactive:
          if (ax[i] < poly_.l[i] - kPrimalTol) {
            state = Row::Lower;
            changed = true;
          } else if (ax[i] > poly_.u[i] + kPrimalTol) {
            state = Row::Upper;
            changed = true;
          }
          break;
      }
    }
    return changed;
  }

  const Polyhedron& poly_;
  const std::vector<ScalarObjective>& objective_;
  Eigen::Index n_, m_;
  std::vector<bool> fixed_;
  Eigen::VectorXd fixed_value_, region_lo_, region_hi_;
  std::vector<Row> rows_;
};

// Solves (D + A^T A) x = r with D = I plus the ball block. Few rows go
// through the Woodbury identity, many rows through a dense Cholesky factor.
class GraphSolver {
 public:
  GraphSolver(const Eigen::MatrixXd& A, Eigen::Index ball_size) : A_(A) {
    const Eigen::Index n = A.cols();
    inv_diag_ = Eigen::VectorXd::Ones(n);
    inv_diag_.head(ball_size).setConstant(0.5);
    low_rank_ = 2 * A.rows() < n;
    if (low_rank_) {
      Eigen::MatrixXd core = Eigen::MatrixXd::Identity(A.rows(), A.rows());
      core.noalias() += A * inv_diag_.asDiagonal() * A.transpose();
      core_.compute(core);
    } else {
      Eigen::MatrixXd gram = inv_diag_.cwiseInverse().asDiagonal();
      gram.noalias() += A.transpose() * A;
      dense_.compute(gram);
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
    if (!low_rank_) return dense_.solve(r);
    const Eigen::VectorXd dr = inv_diag_.cwiseProduct(r);
    if (A_.rows() == 0) return dr;
    const Eigen::VectorXd t = core_.solve(A_ * dr);
    return dr - inv_diag_.cwiseProduct(A_.transpose() * t);
  }

 private:
  const Eigen::MatrixXd& A_;
  Eigen::VectorXd inv_diag_;
  bool low_rank_ = false;
  Eigen::LLT<Eigen::MatrixXd> core_, dense_;
};

}  // namespace

double Polyhedron::max_violation(const Eigen::VectorXd& x) const {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < width(); ++k) worst = std::max({worst, lo[k] - x[k], x[k] - hi[k]});
  if (rows() > 0) {
    const Eigen::VectorXd ax = A * x;
    for (Eigen::Index i = 0; i < rows(); ++i) worst = std::max({worst, l[i] - ax[i], ax[i] - u[i]});
  }
  return worst;
}

std::optional<Polyhedron> presolve(Eigen::Index width, const Eigen::MatrixXd& A_ineq, const Eigen::VectorXd& b_ineq,
                                   const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq) {
  Polyhedron poly;
  poly.lo = Eigen::VectorXd::Constant(width, -kInf);
  poly.hi = Eigen::VectorXd::Constant(width, kInf);
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> lower, upper;

  const auto absorb = [&](const Eigen::MatrixXd& A, const Eigen::VectorXd& b, bool equality) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      Eigen::Index nnz = 0, last = 0;
      for (Eigen::Index k = 0; k < width; ++k)
        if (A(i, k) != 0.0) {
          ++nnz;
          last = k;
        }
      if (nnz == 0) {
        if (equality ? std::abs(b[i]) > kPresolveTol : b[i] < -kPresolveTol) return false;
        continue;
      }
      if (nnz == 1) {
        const double v = b[i] / A(i, last);
        if (equality) {
          if (v < poly.lo[last] - kPresolveTol || v > poly.hi[last] + kPresolveTol) return false;
          poly.lo[last] = poly.hi[last] = v;
        } else if (A(i, last) > 0.0) {
          if (poly.lo[last] != poly.hi[last]) poly.hi[last] = std::min(poly.hi[last], v);
          else if (v < poly.lo[last] - kPresolveTol) return false;
        } else {
          if (poly.lo[last] != poly.hi[last]) poly.lo[last] = std::max(poly.lo[last], v);
          else if (v > poly.hi[last] + kPresolveTol) return false;
        }
        continue;
      }
      const double norm = A.row(i).norm();
      rows.push_back(A.row(i).transpose() / norm);
      upper.push_back(b[i] / norm);
      lower.push_back(equality ? b[i] / norm : -kInf);
    }
    return true;
  };
  if (!absorb(A_eq, b_eq, true) || !absorb(A_ineq, b_ineq, false)) return std::nullopt;
  for (Eigen::Index k = 0; k < width; ++k) {
    if (poly.lo[k] > poly.hi[k]) {
      if (poly.lo[k] - poly.hi[k] > kPresolveTol) return std::nullopt;
      poly.hi[k] = poly.lo[k];
    }
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  poly.A.resize(m, width);
  poly.l.resize(m);
  poly.u.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    poly.A.row(i) = rows[static_cast<std::size_t>(i)].transpose();
    poly.l[i] = lower[static_cast<std::size_t>(i)];
    poly.u[i] = upper[static_cast<std::size_t>(i)];
  }
  return poly;
}

bool fix_variable(Polyhedron& poly, Eigen::Index k, double value) {
  if (value < poly.lo[k] - kPresolveTol || value > poly.hi[k] + kPresolveTol) return false;
  poly.lo[k] = poly.hi[k] = value;
  return true;
}

Eigen::VectorXd project_ball(const LossSpec& spec, const Eigen::VectorXd& w, const Eigen::VectorXd& center,
                             double radius) {
  const Eigen::VectorXd d = w - center;
  if (radius <= 0.0) return center;
  switch (spec.kind) {
    case LossKind::MSE: {
      const double s = d.squaredNorm();
      if (s <= radius) return w;
      return center + d * std::sqrt(radius / s);
    }
    case LossKind::MAE: {
      if (d.lpNorm<1>() <= radius) return w;
      std::vector<double> mags(static_cast<std::size_t>(d.size()));
      for (Eigen::Index k = 0; k < d.size(); ++k) mags[static_cast<std::size_t>(k)] = std::abs(d[k]);
      std::sort(mags.begin(), mags.end(), std::greater<>());
      double cumulative = 0.0, theta = 0.0;
      for (std::size_t j = 0; j < mags.size(); ++j) {
        cumulative += mags[j];
        const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
        if (mags[j] - candidate > 0.0) theta = candidate;
      }
      Eigen::VectorXd out(d.size());
      for (Eigen::Index k = 0; k < d.size(); ++k) {
        const double shrunk = std::max(std::abs(d[k]) - theta, 0.0);
        out[k] = center[k] + (d[k] >= 0.0 ? shrunk : -shrunk);
      }
      return out;
    }
    case LossKind::Huber: {
      const double m = spec.huber_threshold;
      const auto shrink = [&](double lambda, Eigen::Index k) {
        const double v = d[k];
        if (std::abs(v) <= m * (1.0 + 2.0 * lambda)) return v / (1.0 + 2.0 * lambda);
        return v - 2.0 * lambda * m * (v > 0.0 ? 1.0 : -1.0);
      };
      const auto level = [&](double lambda) {
        double total = 0.0;
        for (Eigen::Index k = 0; k < d.size(); ++k) total += penalty(spec, shrink(lambda, k));
        return total;
      };
      if (level(0.0) <= radius) return w;
      double lo = 0.0, hi = 1.0;
      while (level(hi) > radius) {
        lo = hi;
        hi *= 2.0;
      }
      for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (level(mid) > radius ? lo : hi) = mid;
      }
      Eigen::VectorXd out(d.size());
      for (Eigen::Index k = 0; k < d.size(); ++k) out[k] = center[k] + shrink(hi, k);
      return out;
    }
  }
  return w;
}

AdmmResult solve(const Polyhedron& poly, const std::vector<ScalarObjective>& objective,
                 const std::optional<LossBall>& ball, const Eigen::VectorXd& start, const AdmmSettings& settings) {
  const Eigen::Index n = poly.width();
  const Eigen::Index m = poly.rows();
  const Eigen::Index nb = ball ? ball->center.size() : 0;
  const auto nobj = static_cast<Eigen::Index>(objective.size());
  const bool can_polish = settings.polish && !ball;

  const GraphSolver graph(poly.A, nb);

  Eigen::VectorXd x = start.cwiseMax(poly.lo).cwiseMin(poly.hi);
  Eigen::VectorXd y = poly.A * x;
  Eigen::VectorXd yb = x.head(nb);
  Eigen::VectorXd xt = Eigen::VectorXd::Zero(n), yt = Eigen::VectorXd::Zero(m), ybt = Eigen::VectorXd::Zero(nb);
  Eigen::VectorXd xh(n), yh(m), ybh(nb);
  double rho = 1.0;

  double last_attempt = kInf;
  AdmmResult result;
  Polisher polisher(poly, objective);
  const auto try_polish = [&](const Eigen::VectorXd& candidate, double residual) {
    const double act_tol = std::clamp(100.0 * residual, 1e-9, kPolishGate);
    return polisher.run(candidate, act_tol, result);
  };

  for (int it = 1; it <= settings.max_iterations; ++it) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double v = x[k] - xt[k];
      const double p = k < nobj ? objective[static_cast<std::size_t>(k)].prox(1.0 / rho, v) : v;
      xh[k] = std::clamp(p, poly.lo[k], poly.hi[k]);
    }
    for (Eigen::Index i = 0; i < m; ++i) yh[i] = std::clamp(y[i] - yt[i], poly.l[i], poly.u[i]);
    if (ball) ybh = project_ball(ball->spec, yb - ybt, ball->center, ball->radius);

    Eigen::VectorXd rhs = xh + xt;
    if (m > 0) rhs.noalias() += poly.A.transpose() * (yh + yt);
    if (nb > 0) rhs.head(nb) += ybh + ybt;
    const Eigen::VectorXd xn = graph.solve(rhs);
    const Eigen::VectorXd yn = poly.A * xn;
    const Eigen::VectorXd ybn = xn.head(nb);

    const double primal = std::max({inf_norm(xh - xn), inf_norm(yh - yn), inf_norm(ybh - ybn)});
    const double dual = rho * std::max({inf_norm(xn - x), inf_norm(yn - y), inf_norm(ybn - yb)});
    xt += xh - xn;
    yt += yh - yn;
    ybt += ybh - ybn;
    x = xn;
    y = yn;
    yb = ybn;

    result.iterations = it;
    result.primal_residual = primal;
    result.dual_residual = dual;
    if (primal <= settings.tolerance && dual <= settings.tolerance) {
      result.converged = true;
      if (can_polish && try_polish(xh, std::max(primal, dual))) return result;
      result.x = xh;
      result.polished = false;
      return result;
    }
    const double worst = std::max(primal, dual);
    if (can_polish && it % 25 == 0 && worst <= kPolishGate && (worst <= 0.5 * last_attempt || it % 500 == 0)) {
      if (try_polish(xh, worst)) {
        result.converged = true;
        return result;
      }
      last_attempt = worst;
    }
    // Rebalancing rho too often keeps LP-like problems from settling.
    if (it % 200 == 0) {
      double scale = 1.0;
      if (primal > 10.0 * dual) scale = 2.0;
      else if (dual > 10.0 * primal) scale = 0.5;
      if (scale != 1.0 && rho * scale >= 1e-6 && rho * scale <= 1e6) {
        rho *= scale;
        xt /= scale;
        yt /= scale;
        ybt /= scale;
      }
    }
  }
  if (can_polish && try_polish(xh, std::max(result.primal_residual, result.dual_residual))) {
    result.converged = true;
    return result;
  }
  result.x = xh;
  return result;
}

}  // namespace confit::detail
