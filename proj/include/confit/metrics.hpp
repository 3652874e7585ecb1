#ifndef CONFIT_METRICS_HPP_
#define CONFIT_METRICS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "confit/data.hpp"
#include "confit/losses.hpp"

namespace confit {

class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// 1 - SS_res / SS_tot. Throws MetricError("R² undefined") for constant y_true.
double r_squared(const TargetVector& y_true, const TargetVector& y_pred);

/// didi_value(z) / y_train_didi. Throws MetricError("constraint vacuous") when
/// the reference is not positive.
double didi_ratio(const TargetVector& z, const std::vector<ProtectedSpec>& protected_features, double y_train_didi);

/// Mean and population standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Two-pass mean and population std. NaN entries propagate.
MeanStd mean_std(const std::vector<double>& values);

struct IterationHistory;

/// Per-iteration curves and final values across folds.
struct FoldSummary {
  std::size_t folds = 0;
  MeanStd r2_train, r2_test, c_train, c_test;
  std::vector<MeanStd> r2_train_curve, r2_test_curve, c_train_curve, c_test_curve, residual_curve;
};

/// Requires a nonempty list with equal record counts.
FoldSummary summarize_folds(const std::vector<IterationHistory>& histories);

enum class Direction { HigherBetter, LowerBetter };

enum class Significance { ABetter, MBetter, Comparable };

std::string to_string(Significance flag);

/// |mean_a - mean_m| >= std_a + std_m marks a significant gap (inclusive);
/// the winner follows `direction`.
Significance significance_flag(double mean_a, double std_a, double mean_m, double std_m,
                               Direction direction = Direction::HigherBetter);

}  // namespace confit

#endif  // CONFIT_METRICS_HPP_
