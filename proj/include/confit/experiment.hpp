#ifndef CONFIT_EXPERIMENT_HPP_
#define CONFIT_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "confit/data.hpp"
#include "confit/driver.hpp"
#include "confit/history_io.hpp"
#include "confit/metrics.hpp"

namespace confit {

/// Invalid configuration. The message starts with the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class Normalization { TrainFold, Full };

std::string to_string(Normalization n);

struct ExperimentConfig {
  struct DatasetBlock {
    std::string path;
    /// Absolute or relative to the working directory after resolution.
    std::filesystem::path resolved_path;
    std::string target;
    std::vector<std::string> protected_columns;
    std::vector<std::string> dropped;
    std::vector<std::string> categorical;
  } dataset;

  struct ConstraintBlock {
    /// epsilon = fraction * DIDI(y_train), unless an absolute epsilon is given.
    double didi_fraction = 0.2;
    std::optional<double> didi_epsilon;
    std::optional<std::pair<double, double>> box = std::make_pair(0.0, 1.0);
  } constraints;

  struct RunBlock {
    LossSpec loss;
    std::vector<double> alphas{0.1, 0.5, 0.9};
    double beta = 0.1;
    int iterations = 30;
    LearnerSpec learner = LearnerSpec::gradient_boosted_trees();
    std::vector<Algorithm> algorithms{Algorithm::AffineExtension, Algorithm::MovingTargets};
    std::size_t k = 5;
    std::uint64_t seed = 0;
    bool early_stop = false;
    double stop_tolerance = 1e-8;
    double membership_tolerance = kMembershipTolerance;
    bool fail_hard = false;
    Normalization normalization = Normalization::TrainFold;
  } run;

  SolverOptions solver;

  struct OutputBlock {
    std::string directory = "out";
    std::filesystem::path resolved_directory;
    bool include_vectors = true;
  } output;
};

/// Parses and validates the JSON text. Relative paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Encoded numeric view of the configured dataset.
struct PreparedData {
  std::vector<std::string> columns;
  Eigen::MatrixXd numeric;
  std::size_t target_column = 0;
  /// Protected columns as indices into the feature matrix X.
  std::vector<std::size_t> protected_features;
  std::size_t dropped_rows = 0;
};

/// Loads the CSV and checks every referenced column. Missing files and
/// missing columns raise ConfigError.
PreparedData prepare_data(const ExperimentConfig& config);

/// Train/test datasets of every fold under the configured normalization.
std::vector<Fold> make_folds(const ExperimentConfig& config, const PreparedData& data);

struct ExperimentOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  /// 0 means one worker per hardware thread.
  unsigned jobs = 0;
};

struct ExperimentResult {
  std::vector<HistoryFile> histories;
  std::size_t failed_runs = 0;
  std::filesystem::path out_dir;
  std::vector<std::filesystem::path> files;
};

/// Runs every (algorithm, alpha, fold) triple and writes one JSONL history per
/// (algorithm, alpha), summary.csv and summary.json.
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {});

/// Per-metric comparison table (CSV) of two histories. Throws
/// std::invalid_argument when their protocols differ.
std::string compare_histories(const HistoryFile& a, const HistoryFile& m);

/// Per-iteration fold mean and std of train R², train C and the residual (CSV).
std::string plot_data(const HistoryFile& history);

}  // namespace confit

#endif  // CONFIT_EXPERIMENT_HPP_
