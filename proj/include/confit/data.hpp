#ifndef CONFIT_DATA_HPP_
#define CONFIT_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace confit {

/// Raised for malformed input files, with the 1-based line when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A cell is either text or a number; missing cells are dropped at load time.
struct Cell {
  std::string text;
  std::optional<double> number;

  static Cell from_text(std::string raw);
  static Cell from_number(double value);
};

struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::size_t dropped_rows = 0;
  /// Per column: raw value -> code, filled by ordinal_encode.
  std::map<std::string, std::vector<std::string>> encodings;

  std::size_t n() const { return rows.size(); }
  std::size_t d() const { return columns.size(); }
  std::size_t column_index(const std::string& name) const;
};

/// Which columns to keep. Columns listed in `dropped` are removed before the
/// missing-value scan; an empty `retained` list means "all other columns".
struct CsvSchema {
  std::vector<std::string> dropped;
  std::vector<std::string> retained;
};

RawTable load_csv(const std::string& path, const CsvSchema& schema = {});
RawTable parse_csv(const std::string& text, const CsvSchema& schema = {});

/// Maps each listed column's distinct values to 0,1,2,... by first appearance.
RawTable ordinal_encode(const RawTable& table, const std::vector<std::size_t>& categorical_columns);

/// Row groups of one protected feature, keyed by encoded value. Row indices
/// are 0-based.
struct ProtectedSpec {
  std::size_t feature_index = 0;
  std::map<double, std::vector<std::size_t>> groups;

  std::size_t group_count() const { return groups.size(); }
};

struct ColumnScale {
  double min = 0.0;
  double max = 0.0;

  double forward(double x) const { return max > min ? (x - min) / (max - min) : 0.0; }
  double inverse(double u) const { return max > min ? min + u * (max - min) : min; }
};

/// Normalized features and target. X holds the non-target columns in table order.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<ProtectedSpec> protected_features;
  std::vector<std::string> feature_names;
  std::string target_name;
  std::vector<ColumnScale> feature_scales;
  ColumnScale target_scale;

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t d() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t feature_index(const std::string& name) const;

  /// Rows in the given order. Protected groups are rebuilt for the subset.
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

/// Numeric matrix view of an encoded table (every cell must be numeric).
Eigen::MatrixXd numeric_matrix(const RawTable& table);

/// Fits per-column min/max and maps every column to [0,1].
Dataset normalize(const RawTable& table, std::size_t target_column);

/// Applies already-fitted scales. Values outside the fitted range map outside [0,1].
Dataset apply_scales(const Eigen::MatrixXd& numeric, std::size_t target_column,
                     const std::vector<std::string>& columns,
                     const std::vector<ColumnScale>& feature_scales, const ColumnScale& target_scale);

/// Fits scales on the rows of `numeric` selected by `rows`.
void fit_scales(const Eigen::MatrixXd& numeric, const std::vector<std::size_t>& rows,
                std::size_t target_column, std::vector<ColumnScale>& feature_scales,
                ColumnScale& target_scale);

Eigen::VectorXd inverse_target(const Dataset& dataset, const Eigen::VectorXd& normalized);

std::vector<ProtectedSpec> build_protected(const Dataset& dataset,
                                           const std::vector<std::size_t>& feature_indices);

/// Fisher-Yates over mt19937_64 with rejection-sampled bounded integers, so
/// the permutation depends only on the seed.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct FoldIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Shuffled k-fold partition. The first n % k folds get one extra row.
std::vector<FoldIndices> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

struct Fold {
  Dataset train;
  Dataset test;
};

std::vector<Fold> kfold_split(const Dataset& dataset, std::size_t k, std::uint64_t seed);

}  // namespace confit

#endif  // CONFIT_DATA_HPP_
