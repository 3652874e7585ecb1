#ifndef CONFIT_LEARNERS_HPP_
#define CONFIT_LEARNERS_HPP_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "confit/losses.hpp"

namespace confit {

class LearnerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LearnerKind { Ridge, GradientBoostedTrees };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view name);

struct GbtParams {
  int trees = 50;
  int max_depth = 3;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 5;
  /// Kept for configuration symmetry; the ensemble uses exact splits and no
  /// subsampling, so the fit does not depend on it.
  std::uint64_t seed = 0;

  bool operator==(const GbtParams&) const = default;
};

struct LearnerSpec {
  LearnerKind kind = LearnerKind::Ridge;
  double ridge_lambda = 0.0;
  GbtParams gbt;

  static LearnerSpec ridge(double lambda);
  static LearnerSpec gradient_boosted_trees(const GbtParams& params = {});

  void validate() const;
  bool operator==(const LearnerSpec&) const = default;
};

/// Flat binary tree. Leaves have feature == -1.
struct RegressionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::size_t leaf_count() const;
};

/// Immutable after fit; predict is safe to call concurrently.
class FittedModel {
 public:
  const LearnerSpec& spec() const { return spec_; }
  std::size_t input_dimension() const { return d_; }
  /// Training loss under the LossSpec passed to fit, recorded at fit time.
  double training_loss() const { return training_loss_; }

  double intercept() const { return intercept_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  double base_value() const { return intercept_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  TargetVector predict(const Eigen::MatrixXd& X) const;

  /// Predictions after only the first `rounds` trees.
  TargetVector predict_rounds(const Eigen::MatrixXd& X, std::size_t rounds) const;

 private:
  friend FittedModel fit(const LearnerSpec&, const Eigen::MatrixXd&, const TargetVector&, const LossSpec&);

  LearnerSpec spec_;
  std::size_t d_ = 0;
  double training_loss_ = 0.0;
  double intercept_ = 0.0;
  Eigen::VectorXd weights_;
  std::vector<RegressionTree> trees_;
};

/// Ridge: least squares plus lambda * ||w||^2 with an unpenalized intercept,
/// whatever the loss. GBT: boosting on the loss gradient, loss-optimal leaves.
FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& X, const TargetVector& target, const LossSpec& loss);

TargetVector predict(const FittedModel& model, const Eigen::MatrixXd& X);

/// fit() viewed as the projection of `target` onto the model range.
FittedModel range_projection_fit(const LearnerSpec& spec, const Eigen::MatrixXd& X, const TargetVector& target,
                                 const LossSpec& loss);

}  // namespace confit

#endif  // CONFIT_LEARNERS_HPP_
