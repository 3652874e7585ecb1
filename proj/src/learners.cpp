#include "confit/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/QR>

namespace confit {

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::Ridge: return "ridge";
    case LearnerKind::GradientBoostedTrees: return "gbt";
  }
  return "unknown";
}

LearnerKind parse_learner_kind(std::string_view name) {
  if (name == "ridge") return LearnerKind::Ridge;
  if (name == "gbt" || name == "gradient_boosted_trees") return LearnerKind::GradientBoostedTrees;
  throw std::invalid_argument("unknown learner '" + std::string(name) + "' (expected ridge or gbt)");
}

LearnerSpec LearnerSpec::ridge(double lambda) {
  LearnerSpec s;
  s.kind = LearnerKind::Ridge;
  s.ridge_lambda = lambda;
  return s;
}

LearnerSpec LearnerSpec::gradient_boosted_trees(const GbtParams& params) {
  LearnerSpec s;
  s.kind = LearnerKind::GradientBoostedTrees;
  s.gbt = params;
  return s;
}

void LearnerSpec::validate() const {
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda))
    throw std::invalid_argument("ridge_lambda must be a finite value >= 0");
  if (kind == LearnerKind::GradientBoostedTrees) {
    if (gbt.trees < 1) throw std::invalid_argument("gbt trees must be >= 1");
    if (gbt.max_depth < 1) throw std::invalid_argument("gbt max_depth must be >= 1");
    if (!(gbt.learning_rate > 0.0 && gbt.learning_rate <= 1.0))
      throw std::invalid_argument("gbt learning_rate must lie in (0, 1]");
    if (gbt.min_samples_leaf < 1) throw std::invalid_argument("gbt min_samples_leaf must be >= 1");
  }
}

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(k)];
    k = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& node) { return node.feature < 0; }));
}

TargetVector FittedModel::predict(const Eigen::MatrixXd& X) const { return predict_rounds(X, trees_.size()); }

TargetVector FittedModel::predict_rounds(const Eigen::MatrixXd& X, std::size_t rounds) const {
  if (static_cast<std::size_t>(X.cols()) != d_)
    throw std::invalid_argument("predict: expected " + std::to_string(d_) + " columns, got " +
                                std::to_string(X.cols()));
  if (spec_.kind == LearnerKind::Ridge) {
    TargetVector out = X * weights_;
    out.array() += intercept_;
    return out;
  }
  rounds = std::min(rounds, trees_.size());
  const double rate = spec_.gbt.learning_rate;
  TargetVector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double f = intercept_;
    for (std::size_t t = 0; t < rounds; ++t) f += rate * trees_[t].predict_row(X.row(i));
    out[i] = f;
  }
  return out;
}

namespace {

void fit_ridge(const Eigen::MatrixXd& X, const TargetVector& target, double lambda, double& intercept,
               Eigen::VectorXd& weights) {
  const Eigen::RowVectorXd mean_x = X.colwise().mean();
  const double mean_t = target.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - mean_x;
  const Eigen::VectorXd tc = target.array() - mean_t;
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
    if (qr.rank() < X.cols())
      throw LearnerError("singular normal equations for ridge with lambda = 0; use ridge_lambda > 0");
    weights = qr.solve(tc);
  } else {
    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    gram.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw LearnerError("ridge normal equations could not be factored");
    weights = llt.solve(Xc.transpose() * tc);
  }
  intercept = mean_t - mean_x.dot(weights);
}

double pseudo_residual(const LossSpec& loss, double r) {
  switch (loss.kind) {
    case LossKind::MSE: return r;
    case LossKind::MAE: return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    case LossKind::Huber: return 0.5 * (penalty_left_derivative(loss, r) + penalty_right_derivative(loss, r));
  }
  return r;
}

double leaf_step(const LossSpec& loss, const TargetVector& residual, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  if (loss.kind == LossKind::MSE) {
    double sum = 0.0;
    for (auto i : rows) sum += residual[static_cast<Eigen::Index>(i)];
    return sum / static_cast<double>(rows.size());
  }
  std::vector<ScalarTerm> terms;
  terms.reserve(rows.size());
  for (auto i : rows) terms.push_back(ScalarTerm{1.0, residual[static_cast<Eigen::Index>(i)]});
  return ScalarObjective(loss, terms).prox(std::numeric_limits<double>::infinity(), 0.0);
}

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const std::vector<std::vector<std::size_t>>& order, const GbtParams& params,
              const LossSpec& loss)
      : X_(X), order_(order), params_(params), loss_(loss) {}

  RegressionTree build(const TargetVector& residual) {
    const auto n = static_cast<std::size_t>(X_.rows());
    Eigen::VectorXd grad(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      grad[static_cast<Eigen::Index>(i)] = pseudo_residual(loss_, residual[static_cast<Eigen::Index>(i)]);

    RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, 0);
    std::vector<int> open{0};

    for (int depth = 0; depth < params_.max_depth && !open.empty(); ++depth) {
      const auto splits = best_splits(grad, node_of, open, tree.nodes.size());
      std::vector<int> next;
      for (int k : open) {
        const auto& split = splits[static_cast<std::size_t>(k)];
        if (split.feature < 0) continue;
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[static_cast<std::size_t>(k)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = left;
        node.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto& node = tree.nodes[static_cast<std::size_t>(node_of[i])];
        if (node.feature < 0) continue;
        node_of[i] = X_(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? node.left : node.right;
      }
      open = std::move(next);
    }

    std::vector<std::vector<std::size_t>> members(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(node_of[i])].push_back(i);
    for (std::size_t k = 0; k < tree.nodes.size(); ++k)
      if (tree.nodes[k].feature < 0) tree.nodes[k].value = leaf_step(loss_, residual, members[k]);
    return tree;
  }

 private:
  std::vector<Split> best_splits(const Eigen::VectorXd& grad, const std::vector<int>& node_of,
                                 const std::vector<int>& open, std::size_t node_count) const {
    std::vector<char> is_open(node_count, 0);
    for (int k : open) is_open[static_cast<std::size_t>(k)] = 1;

    std::vector<double> total_sum(node_count, 0.0);
    std::vector<std::size_t> total_count(node_count, 0);
    for (std::size_t i = 0; i < node_of.size(); ++i) {
      const auto k = static_cast<std::size_t>(node_of[i]);
      total_sum[k] += grad[static_cast<Eigen::Index>(i)];
      ++total_count[k];
    }

    std::vector<Split> best(node_count);
    std::vector<double> left_sum(node_count);
    std::vector<std::size_t> left_count(node_count);
    std::vector<double> last_value(node_count);
    const std::size_t min_leaf = params_.min_samples_leaf;

    for (std::size_t f = 0; f < order_.size(); ++f) {
      std::fill(left_sum.begin(), left_sum.end(), 0.0);
      std::fill(left_count.begin(), left_count.end(), 0);
      for (auto i : order_[f]) {
        const auto k = static_cast<std::size_t>(node_of[i]);
        if (!is_open[k]) continue;
        const double v = X_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
        const std::size_t nl = left_count[k];
        const std::size_t nr = total_count[k] - nl;
        if (nl >= min_leaf && nr >= min_leaf && v > last_value[k]) {
          const double sl = left_sum[k];
          const double sr = total_sum[k] - sl;
          const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) -
                              total_sum[k] * total_sum[k] / static_cast<double>(total_count[k]);
          if (gain > best[k].gain) {
            double threshold = 0.5 * (last_value[k] + v);
            if (!(threshold < v)) threshold = last_value[k];
            best[k] = Split{gain, static_cast<int>(f), threshold};
          }
        }
        left_sum[k] += grad[static_cast<Eigen::Index>(i)];
        ++left_count[k];
        last_value[k] = v;
      }
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  const std::vector<std::vector<std::size_t>>& order_;
  const GbtParams& params_;
  const LossSpec& loss_;
};

void fit_gbt(const Eigen::MatrixXd& X, const TargetVector& target, const GbtParams& params, const LossSpec& loss,
             double& base, std::vector<RegressionTree>& trees) {
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::vector<std::size_t>> order(static_cast<std::size_t>(X.cols()));
  for (std::size_t f = 0; f < order.size(); ++f) {
    auto& idx = order[f];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto col = static_cast<Eigen::Index>(f);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return X(static_cast<Eigen::Index>(a), col) < X(static_cast<Eigen::Index>(b), col);
    });
  }

  base = target.mean();
  TargetVector current = TargetVector::Constant(target.size(), base);
  TreeBuilder builder(X, order, params, loss);
  trees.clear();
  trees.reserve(static_cast<std::size_t>(params.trees));
  for (int t = 0; t < params.trees; ++t) {
    const TargetVector residual = target - current;
    trees.push_back(builder.build(residual));
    const auto& tree = trees.back();
    for (Eigen::Index i = 0; i < X.rows(); ++i) current[i] += params.learning_rate * tree.predict_row(X.row(i));
  }
}

}  // namespace

FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& X, const TargetVector& target, const LossSpec& loss) {
  spec.validate();
  loss.validate();
  if (X.rows() != target.size())
    throw std::invalid_argument("fit: X has " + std::to_string(X.rows()) + " rows but target has " +
                                std::to_string(target.size()) + " entries");
  if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("fit: empty design matrix");
  if (!X.allFinite() || !target.allFinite()) throw std::invalid_argument("fit: non-finite input");

  FittedModel model;
  model.spec_ = spec;
  model.d_ = static_cast<std::size_t>(X.cols());
  if (spec.kind == LearnerKind::Ridge) {
    fit_ridge(X, target, spec.ridge_lambda, model.intercept_, model.weights_);
  } else {
    fit_gbt(X, target, spec.gbt, loss, model.intercept_, model.trees_);
  }
  model.training_loss_ = confit::loss(loss, model.predict(X), target);
  return model;
}

TargetVector predict(const FittedModel& model, const Eigen::MatrixXd& X) { return model.predict(X); }

FittedModel range_projection_fit(const LearnerSpec& spec, const Eigen::MatrixXd& X, const TargetVector& target,
                                 const LossSpec& loss) {
  return fit(spec, X, target, loss);
}

}  // namespace confit
