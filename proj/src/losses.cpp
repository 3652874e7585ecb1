#include "confit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace confit {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

LossSpec LossSpec::huber(double m) {
  LossSpec spec{LossKind::Huber, m};
  spec.validate();
  return spec;
}

void LossSpec::validate() const {
  if (kind == LossKind::Huber && !(huber_threshold > 0.0))
    throw std::invalid_argument("Huber threshold M must be positive");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::MSE: return "mse";
    case LossKind::MAE: return "mae";
    case LossKind::Huber: return "huber";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mse" || name == "MSE") return LossKind::MSE;
  if (name == "mae" || name == "MAE") return LossKind::MAE;
  if (name == "huber" || name == "Huber" || name == "mhl" || name == "MHL") return LossKind::Huber;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "' (expected mse, mae or huber)");
}

double penalty(const LossSpec& spec, double x) {
  switch (spec.kind) {
    case LossKind::MSE: return x * x;
    case LossKind::MAE: return std::abs(x);
    case LossKind::Huber: {
      const double m = spec.huber_threshold;
      const double ax = std::abs(x);
      return ax <= m ? x * x : 2.0 * m * ax - m * m;
    }
  }
  return 0.0;
}

double penalty_left_derivative(const LossSpec& spec, double x) {
  switch (spec.kind) {
    case LossKind::MSE: return 2.0 * x;
    case LossKind::MAE: return x > 0.0 ? 1.0 : -1.0;
    case LossKind::Huber: {
      const double m = spec.huber_threshold;
      if (x > m) return 2.0 * m;
      if (x <= -m) return -2.0 * m;
      return 2.0 * x;
    }
  }
  return 0.0;
}

double penalty_right_derivative(const LossSpec& spec, double x) {
  switch (spec.kind) {
    case LossKind::MSE: return 2.0 * x;
    case LossKind::MAE: return x >= 0.0 ? 1.0 : -1.0;
    case LossKind::Huber: {
      const double m = spec.huber_threshold;
      if (x >= m) return 2.0 * m;
      if (x < -m) return -2.0 * m;
      return 2.0 * x;
    }
  }
  return 0.0;
}

double loss(const LossSpec& spec, const TargetVector& z, const TargetVector& y) {
  if (z.size() != y.size())
    throw std::invalid_argument("loss: dimension mismatch (" + std::to_string(z.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  if (z.size() == 0) throw std::invalid_argument("loss: empty vectors");
  double total = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) total += penalty(spec, z[k] - y[k]);
  return total / static_cast<double>(z.size());
}

double prox_scalar(const LossSpec& spec, double t, double v, double anchor, double n_scale) {
  if (!(t > 0.0)) throw std::invalid_argument("prox: step t must be positive");
  const double tau = t / n_scale;
  const double u = v - anchor;
  switch (spec.kind) {
    case LossKind::MSE:
      return (v + 2.0 * tau * anchor) / (1.0 + 2.0 * tau);
    case LossKind::MAE: {
      const double shrunk = std::max(std::abs(u) - tau, 0.0);
      return anchor + sign(u) * shrunk;
    }
    case LossKind::Huber: {
      const double m = spec.huber_threshold;
      if (std::abs(u) <= m * (1.0 + 2.0 * tau)) return anchor + u / (1.0 + 2.0 * tau);
      return anchor + u - 2.0 * tau * m * sign(u);
    }
  }
  return v;
}

TargetVector prox(const LossSpec& spec, double t, const TargetVector& v, const TargetVector& anchor) {
  if (v.size() != anchor.size()) throw std::invalid_argument("prox: dimension mismatch");
  spec.validate();
  const double n = static_cast<double>(v.size());
  TargetVector out(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) out[k] = prox_scalar(spec, t, v[k], anchor[k], n);
  return out;
}

ScalarObjective::ScalarObjective(LossSpec spec, std::span<const ScalarTerm> terms)
    : spec_(spec), terms_(terms.begin(), terms.end()) {
  for (const auto& term : terms_) {
    if (term.weight == 0.0) continue;
    switch (spec_.kind) {
      case LossKind::MSE: break;
      case LossKind::MAE: breaks_.push_back(term.anchor); break;
      case LossKind::Huber:
        breaks_.push_back(term.anchor - spec_.huber_threshold);
        breaks_.push_back(term.anchor + spec_.huber_threshold);
        break;
    }
  }
  std::sort(breaks_.begin(), breaks_.end());
  breaks_.erase(std::unique(breaks_.begin(), breaks_.end()), breaks_.end());
}

double ScalarObjective::value(double z) const {
  double total = 0.0;
  for (const auto& term : terms_) total += term.weight * penalty(spec_, z - term.anchor);
  return total;
}

double ScalarObjective::left_derivative(double z) const {
  double total = 0.0;
  for (const auto& term : terms_) total += term.weight * penalty_left_derivative(spec_, z - term.anchor);
  return total;
}

double ScalarObjective::right_derivative(double z) const {
  double total = 0.0;
  for (const auto& term : terms_) total += term.weight * penalty_right_derivative(spec_, z - term.anchor);
  return total;
}

void ScalarObjective::local_model(double probe, double& h, double& q) const {
  h = 0.0;
  q = 0.0;
  for (const auto& term : terms_) {
    const double w = term.weight;
    const double x = probe - term.anchor;
    switch (spec_.kind) {
      case LossKind::MSE:
        h += 2.0 * w;
        q -= 2.0 * w * term.anchor;
        break;
      case LossKind::MAE:
        q += w * sign(x);
        break;
      case LossKind::Huber:
        if (std::abs(x) <= spec_.huber_threshold) {
          h += 2.0 * w;
          q -= 2.0 * w * term.anchor;
        } else {
          q += 2.0 * w * spec_.huber_threshold * sign(x);
        }
        break;
    }
  }
}

double ScalarObjective::prox(double t, double v) const {
  if (!(t > 0.0)) throw std::invalid_argument("prox: step t must be positive");
  const double inv_t = std::isinf(t) ? 0.0 : 1.0 / t;
  const auto total_right = [&](double z) { return right_derivative(z) + (z - v) * inv_t; };
  const auto total_left = [&](double z) { return left_derivative(z) + (z - v) * inv_t; };

  // Root of the affine derivative on the open region (lo, hi).
  const auto solve_region = [&](double lo, double hi) {
    double probe;
    if (std::isinf(lo) && std::isinf(hi)) probe = v;
    else if (std::isinf(lo)) probe = hi - 1.0;
    else if (std::isinf(hi)) probe = lo + 1.0;
    else probe = 0.5 * (lo + hi);
    double h, q;
    local_model(probe, h, q);
    const double slope = h + inv_t;
    const double offset = q - v * inv_t;
    if (slope <= 0.0) {
      if (offset == 0.0 && std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
      throw std::domain_error("prox: objective unbounded below");
    }
    return std::clamp(-offset / slope, lo, hi);
  };

  const double inf = std::numeric_limits<double>::infinity();
  double previous = -inf;
  for (std::size_t k = 0; k < breaks_.size(); ++k) {
    const double b = breaks_[k];
    const double right = total_right(b);
    if (right >= 0.0) {
      if (total_left(b) <= 0.0) {
        // b is a minimizer; with t infinite a flat stretch may follow.
        if (right == 0.0 && inv_t == 0.0) {
          const double next = k + 1 < breaks_.size() ? breaks_[k + 1] : inf;
          double h, q;
          local_model(std::isinf(next) ? b + 1.0 : 0.5 * (b + next), h, q);
          if (h == 0.0 && q == 0.0 && std::isfinite(next)) return 0.5 * (b + next);
        }
        return b;
      }
      return solve_region(previous, b);
    }
    previous = b;
  }
  return solve_region(previous, inf);
}

}  // namespace confit
