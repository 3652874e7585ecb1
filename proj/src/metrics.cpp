#include "confit/metrics.hpp"

#include <cmath>

#include "confit/constraints.hpp"
#include "confit/driver.hpp"

namespace confit {

double r_squared(const TargetVector& y_true, const TargetVector& y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("r_squared: dimension mismatch");
  if (y_true.size() < 2) throw std::invalid_argument("r_squared: need at least two values");
  const double mean = y_true.mean();
  const double ss_tot = (y_true.array() - mean).square().sum();
  if (!(ss_tot > 0.0)) throw MetricError("R² undefined for a constant target");
  const double ss_res = (y_true - y_pred).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

double didi_ratio(const TargetVector& z, const std::vector<ProtectedSpec>& protected_features, double y_train_didi) {
  if (!(y_train_didi > 0.0)) throw MetricError("constraint vacuous: training DIDI is zero");
  return didi_value(z, protected_features) / y_train_didi;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  const double count = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / count;
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / count);
  return out;
}

std::string to_string(Significance flag) {
  switch (flag) {
    case Significance::ABetter: return "A-better";
    case Significance::MBetter: return "M-better";
    case Significance::Comparable: return "comparable";
  }
  return "comparable";
}

Significance significance_flag(double mean_a, double std_a, double mean_m, double std_m, Direction direction) {
  if (std_a < 0.0 || std_m < 0.0) throw std::invalid_argument("significance_flag: negative standard deviation");
  if (!(std::abs(mean_a - mean_m) >= std_a + std_m) || mean_a == mean_m) return Significance::Comparable;
  const bool a_higher = mean_a > mean_m;
  const bool a_wins = direction == Direction::HigherBetter ? a_higher : !a_higher;
  return a_wins ? Significance::ABetter : Significance::MBetter;
}

FoldSummary summarize_folds(const std::vector<IterationHistory>& histories) {
  if (histories.empty()) throw std::invalid_argument("summarize_folds: no histories");
  const std::size_t count = histories.front().records.size();
  for (const auto& h : histories)
    if (h.records.size() != count) throw std::invalid_argument("summarize_folds: folds have different iteration counts");

  FoldSummary s;
  s.folds = histories.size();
  const auto column = [&](auto member, std::size_t i) {
    std::vector<double> v;
    v.reserve(histories.size());
    for (const auto& h : histories) v.push_back(h.records[i].*member);
    return mean_std(v);
  };
  for (std::size_t i = 0; i < count; ++i) {
    s.r2_train_curve.push_back(column(&IterationRecord::r2_train, i));
    s.r2_test_curve.push_back(column(&IterationRecord::r2_test, i));
    s.c_train_curve.push_back(column(&IterationRecord::c_train, i));
    s.c_test_curve.push_back(column(&IterationRecord::c_test, i));
    s.residual_curve.push_back(column(&IterationRecord::residual, i));
  }
  if (count > 0) {
    s.r2_train = s.r2_train_curve.back();
    s.r2_test = s.r2_test_curve.back();
    s.c_train = s.c_train_curve.back();
    s.c_test = s.c_test_curve.back();
  }
  return s;
}

}  // namespace confit
