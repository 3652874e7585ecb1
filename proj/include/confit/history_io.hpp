#ifndef CONFIT_HISTORY_IO_HPP_
#define CONFIT_HISTORY_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "confit/driver.hpp"

namespace confit {

class HistoryFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g; non-finite values become null.
std::string format_double(double value);

/// Minimal streaming JSON emitter with fixed number formatting.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);
  JsonWriter& value(double v);
  JsonWriter& value(int v);
  JsonWriter& value(std::size_t v);
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& value(const Eigen::VectorXd& v);
  JsonWriter& null();

  const std::string& str() const { return out_; }

 private:
  void separate();

  std::string out_;
  std::vector<bool> first_;
  bool after_key_ = false;
};

/// Run-level metadata shared by every fold of one (algorithm, alpha) pair.
struct HistoryHeader {
  Algorithm algorithm = Algorithm::AffineExtension;
  double alpha = 0.0;
  double alpha_m = 0.0;
  double beta = 0.0;
  LossSpec loss;
  LearnerKind learner = LearnerKind::Ridge;
  std::string dataset;
  std::string target;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  std::string normalization;
  ContractionVerdict verdict;

  /// Fields that must agree for two histories to be comparable.
  bool same_protocol(const HistoryHeader& other, std::string& reason) const;
};

struct FoldRun {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double epsilon = 0.0;
  bool ok = true;
  std::string error;
  IterationHistory history;
};

struct HistoryFile {
  HistoryHeader header;
  std::vector<FoldRun> folds;

  /// Histories of the folds that completed.
  std::vector<IterationHistory> completed() const;
};

/// One JSON object per line: a header, then per fold a fold record followed
/// by its iteration records.
void write_history(std::ostream& out, const HistoryFile& file);
std::string write_history(const HistoryFile& file);

/// Refuses streams holding more than one header.
HistoryFile read_history(std::istream& in);
HistoryFile read_history_file(const std::string& path);

}  // namespace confit

#endif  // CONFIT_HISTORY_IO_HPP_
