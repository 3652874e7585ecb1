// Independent reference implementations used by the unit and acceptance tests.
// Nothing here calls into the solver; the checks compare library output
// against these.

#ifndef CONFIT_TESTS_ORACLES_HPP_
#define CONFIT_TESTS_ORACLES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "confit/constraints.hpp"
#include "confit/data.hpp"
#include "confit/losses.hpp"

namespace oracle {

/// Minimizer of a unimodal f on [lo, hi].
inline double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double g(const confit::LossSpec& loss, double x) {
  switch (loss.kind) {
    case confit::LossKind::MSE:
      return x * x;
    case confit::LossKind::MAE:
      return std::abs(x);
    case confit::LossKind::Huber: {
      const double m = loss.huber_threshold, a = std::abs(x);
      return a <= m ? x * x : 2.0 * m * a - m * m;
    }
  }
  return 0.0;
}

inline double mean_loss(const confit::LossSpec& loss, const std::vector<double>& z, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) s += g(loss, z[k] - y[k]);
  return s / static_cast<double>(z.size());
}

/// DIDI from raw protected columns: columns[p][row] is the value of feature p.
inline double brute_didi(const std::vector<double>& z, const std::vector<std::vector<int>>& columns) {
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  double total = 0.0;
  for (const auto& col : columns) {
    std::map<int, std::pair<double, int>> acc;
    for (std::size_t r = 0; r < z.size(); ++r) {
      acc[col[r]].first += z[r];
      acc[col[r]].second += 1;
    }
    for (const auto& [value, sc] : acc) total += std::abs(mean - sc.first / sc.second);
  }
  return total;
}

/// Hat matrix of least squares with an intercept, through an explicit inverse.
inline Eigen::MatrixXd ridge_projector(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd A(X.rows(), X.cols() + 1);
  A.col(0).setOnes();
  A.rightCols(X.cols()) = X;
  const Eigen::MatrixXd gram = A.transpose() * A;
  return A * gram.inverse() * A.transpose();
}

/// Best single split of `r` on column `x` by exhaustive threshold enumeration.
struct Stump {
  double threshold = 0.0;
  double left = 0.0;
  double right = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

inline Stump best_stump(const std::vector<double>& x, const std::vector<double>& r, std::size_t min_leaf) {
  std::vector<double> values = x;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  Stump best;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const double t = 0.5 * (values[i] + values[i + 1]);
    double sl = 0, sr = 0;
    std::size_t nl = 0, nr = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x[k] <= t) {
        sl += r[k];
        ++nl;
      } else {
        sr += r[k];
        ++nr;
      }
    }
    if (nl < min_leaf || nr < min_leaf) continue;
    const double ml = sl / nl, mr = sr / nr;
    double sse = 0;
    for (std::size_t k = 0; k < x.size(); ++k) sse += std::pow(r[k] - (x[k] <= t ? ml : mr), 2);
    if (sse < best.sse) best = {t, ml, mr, sse};
  }
  return best;
}

/// Random polytope { z : a_j . z <= a_j . c + margin_j } around a point c in
/// [0.2, 0.8]^n, with unit normals.
struct Polytope {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd center;
};

inline Polytope random_polytope(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uc(0.2, 0.8), um(0.05, 0.3);
  std::normal_distribution<double> nd;
  Polytope p;
  p.center.resize(static_cast<Eigen::Index>(n));
  for (auto& v : p.center) v = uc(rng);
  p.A.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  p.b.resize(static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < p.A.rows(); ++j) {
    for (Eigen::Index k = 0; k < p.A.cols(); ++k) p.A(j, k) = nd(rng);
    p.A.row(j).normalize();
    p.b(j) = p.A.row(j).dot(p.center) + um(rng);
  }
  return p;
}

inline std::shared_ptr<const confit::ConstraintSet> as_constraints(const Polytope& p) {
  const auto n = static_cast<std::size_t>(p.A.cols());
  return std::make_shared<const confit::ConstraintSet>(
      confit::ConstraintSet::custom(p.A, p.b, Eigen::MatrixXd(0, p.A.cols()), Eigen::VectorXd(0), n, 0));
}

/// Small regression problem: X uniform on [0,1]^d, y linear plus noise.
inline confit::Dataset linear_dataset(std::size_t n, std::size_t d, std::mt19937_64& rng, double noise = 0.1) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, noise);
  confit::Dataset data;
  data.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < data.X.size(); ++i) data.X.data()[i] = u(rng);
  Eigen::VectorXd w(static_cast<Eigen::Index>(d));
  for (auto& v : w) v = u(rng) - 0.5;
  data.y = (data.X * w).array() + 0.5;
  for (auto& v : data.y) v += nd(rng);
  for (std::size_t k = 0; k < d; ++k) data.feature_names.push_back("x" + std::to_string(k));
  data.target_name = "y";
  return data;
}

// Two-dimensional projection oracle.
//
// The feasible region is a box intersected with halfspaces and optionally a
// loss ball. The minimizer of a convex objective over it lies in the interior,
// on an edge, or at a vertex, so the candidate set is an interior grid plus
// dense samples along every boundary curve plus every exactly computed vertex.

struct Halfspace2 {
  double a0, a1, b;
};

struct Problem2 {
  confit::LossSpec loss;
  double y[2] = {0, 0};
  double lo = 0.0, hi = 1.0;
  std::vector<Halfspace2> halfspaces;
  bool trust = false;
  double center[2] = {0, 0};
  double radius = 0.0;

  double objective(double z0, double z1) const { return 0.5 * (g(loss, z0 - y[0]) + g(loss, z1 - y[1])); }
  double ball(double z0, double z1) const { return 0.5 * (g(loss, z0 - center[0]) + g(loss, z1 - center[1])); }

  bool feasible(double z0, double z1, double tol = 1e-12) const {
    if (z0 < lo - tol || z0 > hi + tol || z1 < lo - tol || z1 > hi + tol) return false;
    for (const auto& h : halfspaces)
      if (h.a0 * z0 + h.a1 * z1 > h.b + tol) return false;
    return !trust || ball(z0, z1) <= radius + tol;
  }
};

struct Oracle2Result {
  double z[2] = {0, 0};
  double value = std::numeric_limits<double>::infinity();
  /// Largest coordinate spread of the samples within 1e-7 of the minimum.
  double spread = 0.0;
  std::size_t samples = 0;
};

inline Oracle2Result solve2(const Problem2& p, double step = 1e-3) {
  std::vector<std::array<double, 2>> pts;
  const int cells = static_cast<int>(std::lround((p.hi - p.lo) / step));
  for (int i = 0; i <= cells; ++i)
    for (int j = 0; j <= cells; ++j) pts.push_back({p.lo + i * (p.hi - p.lo) / cells, p.lo + j * (p.hi - p.lo) / cells});

  std::vector<Halfspace2> lines = p.halfspaces;
  lines.push_back({1, 0, p.hi});
  lines.push_back({-1, 0, -p.lo});
  lines.push_back({0, 1, p.hi});
  lines.push_back({0, -1, -p.lo});

  const double span = 4.0 * (p.hi - p.lo);
  for (const auto& l : lines) {
    const double nn = l.a0 * l.a0 + l.a1 * l.a1;
    const double o0 = l.a0 * l.b / nn, o1 = l.a1 * l.b / nn;
    const double d0 = -l.a1 / std::sqrt(nn), d1 = l.a0 / std::sqrt(nn);
    const int m = static_cast<int>(2 * span / step);
    for (int i = 0; i <= m; ++i) {
      const double t = -span + i * step;
      pts.push_back({o0 + t * d0, o1 + t * d1});
    }
    if (p.trust) {
      // The ball level along the line is convex in t; bracket both crossings.
      const auto phi = [&](double t) { return p.ball(o0 + t * d0, o1 + t * d1) - p.radius; };
      const double tm = golden_section(phi, -span, span);
      if (phi(tm) < 0) {
        for (double far : {-span, span}) {
          double in = tm, out = far;
          if (phi(out) <= 0) continue;
          for (int k = 0; k < 200 && std::abs(out - in) > 1e-15; ++k) {
            const double mid = 0.5 * (in + out);
            (phi(mid) <= 0 ? in : out) = mid;
          }
          pts.push_back({o0 + in * d0, o1 + in * d1});
        }
      }
    }
  }
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const auto& u = lines[i];
      const auto& v = lines[j];
      const double det = u.a0 * v.a1 - u.a1 * v.a0;
      if (std::abs(det) < 1e-12) continue;
      pts.push_back({(u.b * v.a1 - u.a1 * v.b) / det, (u.a0 * v.b - u.b * v.a0) / det});
    }
  if (p.trust) {
    const int angles = 40000;
    for (int i = 0; i < angles; ++i) {
      const double th = 2.0 * std::numbers::pi * i / angles;
      const double u0 = std::cos(th), u1 = std::sin(th);
      double in = 0.0, out = 1.0;
      while (p.ball(p.center[0] + out * u0, p.center[1] + out * u1) <= p.radius) out *= 2.0;
      for (int k = 0; k < 100 && out - in > 1e-15; ++k) {
        const double mid = 0.5 * (in + out);
        (p.ball(p.center[0] + mid * u0, p.center[1] + mid * u1) <= p.radius ? in : out) = mid;
      }
      pts.push_back({p.center[0] + in * u0, p.center[1] + in * u1});
    }
    if (p.loss.kind == confit::LossKind::MAE) {
      const double r = 2.0 * p.radius;
      pts.push_back({p.center[0] + r, p.center[1]});
      pts.push_back({p.center[0] - r, p.center[1]});
      pts.push_back({p.center[0], p.center[1] + r});
      pts.push_back({p.center[0], p.center[1] - r});
    }
  }

  Oracle2Result res;
  std::vector<std::pair<double, std::array<double, 2>>> feasible;
  for (const auto& q : pts) {
    if (!p.feasible(q[0], q[1])) continue;
    const double f = p.objective(q[0], q[1]);
    feasible.push_back({f, q});
    if (f < res.value) {
      res.value = f;
      res.z[0] = q[0];
      res.z[1] = q[1];
    }
  }
  res.samples = feasible.size();
  double lo0 = res.z[0], hi0 = res.z[0], lo1 = res.z[1], hi1 = res.z[1];
  for (const auto& [f, q] : feasible) {
    if (f > res.value + 1e-7) continue;
    lo0 = std::min(lo0, q[0]);
    hi0 = std::max(hi0, q[0]);
    lo1 = std::min(lo1, q[1]);
    hi1 = std::max(hi1, q[1]);
  }
  res.spread = std::max(hi0 - lo0, hi1 - lo1);
  return res;
}

/// The same problem in library form.
inline std::shared_ptr<const confit::ConstraintSet> constraints_of(const Problem2& p) {
  auto box = confit::build_box(p.lo, p.hi, 2);
  if (p.halfspaces.empty()) return std::make_shared<const confit::ConstraintSet>(box);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(p.halfspaces.size()), 2);
  Eigen::VectorXd b(A.rows());
  for (Eigen::Index j = 0; j < A.rows(); ++j) {
    const auto& h = p.halfspaces[static_cast<std::size_t>(j)];
    A(j, 0) = h.a0;
    A(j, 1) = h.a1;
    b(j) = h.b;
  }
  auto hs = confit::ConstraintSet::custom(A, b, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), 2, 0);
  return std::make_shared<const confit::ConstraintSet>(confit::intersect(box, hs));
}

}  // namespace oracle

#endif  // CONFIT_TESTS_ORACLES_HPP_
