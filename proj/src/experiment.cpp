#include "confit/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "confit/constraints.hpp"
#include "confit/log.hpp"

namespace confit {

using nlohmann::json;

std::string to_string(Normalization n) { return n == Normalization::TrainFold ? "train" : "full"; }

namespace {

// Typed accessors that report the dotted field path on failure.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& item : node_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; }))
        throw ConfigError(at(item.key()), "unknown field");
    }
  }

  bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }
  bool is_null(const char* key) const { return node_.contains(key) && node_.at(key).is_null(); }
  const std::string& path() const { return path_; }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const char* key) const {
    if (!node_.contains(key)) throw ConfigError(at(key), "required field is missing");
    return node_.at(key);
  }

  std::string string(const char* key) const {
    const auto& v = raw(key);
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    return v.get<std::string>();
  }

  double number(const char* key) const {
    const auto& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    return v.get<double>();
  }

  long long integer(const char* key) const {
    const auto& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
    return v.get<long long>();
  }

  std::uint64_t unsigned_integer(const char* key) const {
    const auto& v = raw(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw ConfigError(at(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const char* key) const {
    const auto& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::vector<std::string> strings(const char* key) const {
    const auto& v = raw(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  std::vector<double> numbers(const char* key) const {
    const auto& v = raw(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  Reader child(const char* key) const { return Reader(raw(key), at(key)); }

 private:
  const json& node_;
  std::string path_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

LearnerSpec parse_learner(const Reader& r) {
  r.allow({"kind", "lambda", "trees", "max_depth", "learning_rate", "min_samples_leaf", "seed"});
  LearnerSpec spec;
  try {
    spec.kind = parse_learner_kind(r.string("kind"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.at("kind"), e.what());
  }
  if (r.has("lambda")) spec.ridge_lambda = r.number("lambda");
  if (r.has("trees")) spec.gbt.trees = static_cast<int>(r.integer("trees"));
  if (r.has("max_depth")) spec.gbt.max_depth = static_cast<int>(r.integer("max_depth"));
  if (r.has("learning_rate")) spec.gbt.learning_rate = r.number("learning_rate");
  if (r.has("min_samples_leaf")) {
    const auto v = r.integer("min_samples_leaf");
    if (v < 1) throw ConfigError(r.at("min_samples_leaf"), "must be >= 1");
    spec.gbt.min_samples_leaf = static_cast<std::size_t>(v);
  }
  if (r.has("seed")) spec.gbt.seed = r.unsigned_integer("seed");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.path(), e.what());
  }
  return spec;
}

void check_unique(const std::vector<std::string>& names, const std::string& field) {
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j]) throw ConfigError(field, "column '" + names[i] + "' listed twice");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  const Reader top(root, "");
  top.allow({"dataset", "constraints", "run", "solver", "output"});
  ExperimentConfig cfg;

  {
    const Reader r = top.child("dataset");
    r.allow({"path", "target", "protected", "dropped", "categorical"});
    cfg.dataset.path = r.string("path");
    if (cfg.dataset.path.empty()) throw ConfigError("dataset.path", "must not be empty");
    cfg.dataset.resolved_path = resolve(base_dir, cfg.dataset.path);
    cfg.dataset.target = r.string("target");
    if (r.has("protected")) cfg.dataset.protected_columns = r.strings("protected");
    if (r.has("dropped")) cfg.dataset.dropped = r.strings("dropped");
    if (r.has("categorical")) cfg.dataset.categorical = r.strings("categorical");
    check_unique(cfg.dataset.protected_columns, "dataset.protected");
    check_unique(cfg.dataset.dropped, "dataset.dropped");
    for (const auto& p : cfg.dataset.protected_columns) {
      if (p == cfg.dataset.target) throw ConfigError("dataset.protected", "the target cannot be protected");
      if (std::find(cfg.dataset.dropped.begin(), cfg.dataset.dropped.end(), p) != cfg.dataset.dropped.end())
        throw ConfigError("dataset.protected", "column '" + p + "' is also dropped");
    }
    if (std::find(cfg.dataset.dropped.begin(), cfg.dataset.dropped.end(), cfg.dataset.target) !=
        cfg.dataset.dropped.end())
      throw ConfigError("dataset.dropped", "the target column cannot be dropped");
  }

  if (top.has("constraints")) {
    const Reader r = top.child("constraints");
    r.allow({"didi_fraction", "didi_epsilon", "box"});
    if (r.has("didi_fraction") && r.has("didi_epsilon"))
      throw ConfigError("constraints", "give either didi_fraction or didi_epsilon, not both");
    if (r.has("didi_fraction")) {
      cfg.constraints.didi_fraction = r.number("didi_fraction");
      if (!(cfg.constraints.didi_fraction > 0.0 && cfg.constraints.didi_fraction <= 1.0))
        throw ConfigError("constraints.didi_fraction", "must lie in (0, 1]");
    }
    if (r.has("didi_epsilon")) {
      cfg.constraints.didi_epsilon = r.number("didi_epsilon");
      if (!(*cfg.constraints.didi_epsilon >= 0.0)) throw ConfigError("constraints.didi_epsilon", "must be >= 0");
    }
    if (r.has("box")) {
      const auto box = r.numbers("box");
      if (box.size() != 2) throw ConfigError("constraints.box", "expected [lower, upper]");
      if (!(box[0] <= box[1])) throw ConfigError("constraints.box", "lower bound exceeds upper bound");
      cfg.constraints.box = std::make_pair(box[0], box[1]);
    } else if (r.is_null("box")) {
      cfg.constraints.box.reset();
    }
  }

  {
    const Reader r = top.child("run");
    r.allow({"loss", "huber_threshold", "alphas", "beta", "iterations", "learner", "algorithms", "k", "seed",
             "early_stop", "stop_tolerance", "membership_tolerance", "fail_hard", "normalization"});
    if (r.has("loss")) {
      try {
        cfg.run.loss.kind = parse_loss_kind(r.string("loss"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError("run.loss", e.what());
      }
    }
    if (r.has("huber_threshold")) {
      cfg.run.loss.huber_threshold = r.number("huber_threshold");
      if (!(cfg.run.loss.huber_threshold > 0.0)) throw ConfigError("run.huber_threshold", "must be > 0");
    }
    if (r.has("alphas")) cfg.run.alphas = r.numbers("alphas");
    if (cfg.run.alphas.empty()) throw ConfigError("run.alphas", "at least one alpha is required");
    for (std::size_t i = 0; i < cfg.run.alphas.size(); ++i)
      if (!(cfg.run.alphas[i] >= 0.0 && cfg.run.alphas[i] < 1.0))
        throw ConfigError("run.alphas[" + std::to_string(i) + "]", "must lie in [0, 1)");
    if (r.has("beta")) {
      cfg.run.beta = r.number("beta");
      if (!(cfg.run.beta >= 0.0)) throw ConfigError("run.beta", "must be >= 0");
    }
    if (r.has("iterations")) {
      const auto v = r.integer("iterations");
      if (v < 1) throw ConfigError("run.iterations", "must be >= 1");
      cfg.run.iterations = static_cast<int>(v);
    }
    if (r.has("learner")) cfg.run.learner = parse_learner(r.child("learner"));
    if (r.has("algorithms")) {
      cfg.run.algorithms.clear();
      const auto names = r.strings("algorithms");
      for (std::size_t i = 0; i < names.size(); ++i) {
        try {
          cfg.run.algorithms.push_back(parse_algorithm(names[i]));
        } catch (const std::invalid_argument& e) {
          throw ConfigError("run.algorithms[" + std::to_string(i) + "]", e.what());
        }
      }
      if (cfg.run.algorithms.empty()) throw ConfigError("run.algorithms", "at least one algorithm is required");
    }
    if (std::find(cfg.run.algorithms.begin(), cfg.run.algorithms.end(), Algorithm::MovingTargets) !=
        cfg.run.algorithms.end()) {
      for (std::size_t i = 0; i < cfg.run.alphas.size(); ++i)
        if (cfg.run.alphas[i] == 0.0)
          throw ConfigError("run.alphas[" + std::to_string(i) + "]",
                            "moving_targets needs alpha > 0 (alpha_m = 1/alpha - 1)");
    }
    if (r.has("k")) {
      const auto v = r.integer("k");
      if (v < 2) throw ConfigError("run.k", "must be >= 2");
      cfg.run.k = static_cast<std::size_t>(v);
    }
    if (r.has("seed")) cfg.run.seed = r.unsigned_integer("seed");
    if (r.has("early_stop")) cfg.run.early_stop = r.boolean("early_stop");
    if (r.has("stop_tolerance")) {
      cfg.run.stop_tolerance = r.number("stop_tolerance");
      if (!(cfg.run.stop_tolerance >= 0.0)) throw ConfigError("run.stop_tolerance", "must be >= 0");
    }
    if (r.has("membership_tolerance")) {
      cfg.run.membership_tolerance = r.number("membership_tolerance");
      if (!(cfg.run.membership_tolerance >= 0.0)) throw ConfigError("run.membership_tolerance", "must be >= 0");
    }
    if (r.has("fail_hard")) cfg.run.fail_hard = r.boolean("fail_hard");
    if (r.has("normalization")) {
      const auto v = r.string("normalization");
      if (v == "train") cfg.run.normalization = Normalization::TrainFold;
      else if (v == "full") cfg.run.normalization = Normalization::Full;
      else throw ConfigError("run.normalization", "expected \"train\" or \"full\"");
    }
  }

  if (top.has("solver")) {
    const Reader r = top.child("solver");
    r.allow({"tolerance", "max_iterations", "warm_start", "polish"});
    if (r.has("tolerance")) {
      cfg.solver.tolerance = r.number("tolerance");
      if (!(cfg.solver.tolerance > 0.0)) throw ConfigError("solver.tolerance", "must be > 0");
    }
    if (r.has("max_iterations")) {
      const auto v = r.integer("max_iterations");
      if (v < 1) throw ConfigError("solver.max_iterations", "must be >= 1");
      cfg.solver.max_iterations = static_cast<int>(v);
    }
    if (r.has("warm_start")) cfg.solver.warm_start = r.boolean("warm_start");
    if (r.has("polish")) cfg.solver.polish = r.boolean("polish");
  }

  if (top.has("output")) {
    const Reader r = top.child("output");
    r.allow({"directory", "include_vectors"});
    if (r.has("directory")) cfg.output.directory = r.string("directory");
    if (r.has("include_vectors")) cfg.output.include_vectors = r.boolean("include_vectors");
  }
  cfg.output.resolved_directory = resolve(base_dir, cfg.output.directory);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return parse_config(buffer.str(), base);
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  const auto& ds = cfg.dataset;
  if (!std::filesystem::exists(ds.resolved_path))
    throw ConfigError("dataset.path", "file not found: " + ds.resolved_path.string());

  CsvSchema schema;
  schema.dropped = ds.dropped;
  RawTable table;
  try {
    table = load_csv(ds.resolved_path.string(), schema);
  } catch (const DataError& e) {
    const std::string what = e.what();
    if (what.rfind("unknown column", 0) == 0) throw ConfigError("dataset.dropped", what);
    throw;
  }

  const auto column_of = [&](const std::string& name, const std::string& field) {
    const auto it = std::find(table.columns.begin(), table.columns.end(), name);
    if (it == table.columns.end()) throw ConfigError(field, "column '" + name + "' not found in " + ds.path);
    return static_cast<std::size_t>(it - table.columns.begin());
  };

  PreparedData out;
  out.target_column = column_of(ds.target, "dataset.target");
  std::vector<std::size_t> categorical;
  for (std::size_t i = 0; i < ds.categorical.size(); ++i)
    categorical.push_back(column_of(ds.categorical[i], "dataset.categorical[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < ds.protected_columns.size(); ++i) {
    const auto c = column_of(ds.protected_columns[i], "dataset.protected[" + std::to_string(i) + "]");
    out.protected_features.push_back(c < out.target_column ? c : c - 1);
  }
  table = ordinal_encode(table, categorical);
  out.numeric = numeric_matrix(table);
  out.columns = table.columns;
  out.dropped_rows = table.dropped_rows;
  if (out.dropped_rows > 0)
    log::warn("dropped " + std::to_string(out.dropped_rows) + " rows with missing values from " + ds.path);
  return out;
}

std::vector<Fold> make_folds(const ExperimentConfig& cfg, const PreparedData& data) {
  const auto n = static_cast<std::size_t>(data.numeric.rows());
  std::vector<Fold> folds;
  if (cfg.run.normalization == Normalization::Full) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    std::vector<ColumnScale> fs;
    ColumnScale ts;
    fit_scales(data.numeric, all, data.target_column, fs, ts);
    Dataset full = apply_scales(data.numeric, data.target_column, data.columns, fs, ts);
    full.protected_features = build_protected(full, data.protected_features);
    return kfold_split(full, cfg.run.k, cfg.run.seed);
  }
  const auto rows_of = [&](const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), data.numeric.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      m.row(static_cast<Eigen::Index>(i)) = data.numeric.row(static_cast<Eigen::Index>(rows[i]));
    return m;
  };
  for (const auto& idx : kfold_indices(n, cfg.run.k, cfg.run.seed)) {
    std::vector<ColumnScale> fs;
    ColumnScale ts;
    fit_scales(data.numeric, idx.train, data.target_column, fs, ts);
    Fold fold;
    fold.train = apply_scales(rows_of(idx.train), data.target_column, data.columns, fs, ts);
    fold.test = apply_scales(rows_of(idx.test), data.target_column, data.columns, fs, ts);
    fold.train.protected_features = build_protected(fold.train, data.protected_features);
    fold.test.protected_features = build_protected(fold.test, data.protected_features);
    folds.push_back(std::move(fold));
  }
  return folds;
}

namespace {

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }

struct Job {
  std::size_t history = 0;
  std::size_t fold = 0;
  Algorithm algorithm = Algorithm::AffineExtension;
  double alpha = 0.0;
};

std::shared_ptr<const ConstraintSet> fold_constraints(const ExperimentConfig& cfg, const Dataset& train,
                                                      double& epsilon) {
  const std::size_t n = train.n();
  epsilon = std::numeric_limits<double>::quiet_NaN();
  std::optional<ConstraintSet> set;
  if (!train.protected_features.empty()) {
    epsilon = cfg.constraints.didi_epsilon
                  ? *cfg.constraints.didi_epsilon
                  : didi_epsilon(train.y, train.protected_features, cfg.constraints.didi_fraction);
    set = build_didi_constraints(train.protected_features, epsilon, n);
  }
  if (cfg.constraints.box) {
    ConstraintSet box = build_box(cfg.constraints.box->first, cfg.constraints.box->second, n);
    set = set ? intersect(*set, box) : std::move(box);
  }
  if (!set) set = ConstraintSet::unconstrained(n);
  return std::make_shared<const ConstraintSet>(std::move(*set));
}

std::string alpha_tag(double alpha) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", alpha);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string summary_csv(const std::vector<HistoryFile>& histories) {
  std::string out =
      "algorithm,alpha,alpha_m,folds,failed_folds,r2_train_mean,r2_train_std,r2_test_mean,r2_test_std,"
      "c_train_mean,c_train_std,c_test_mean,c_test_std,infeasible_steps,feasible_steps,verdict\n";
  for (const auto& h : histories) {
    const auto done = h.completed();
    FoldSummary s;
    if (!done.empty()) s = summarize_folds(done);
    std::size_t infeasible = 0, feasible = 0;
    for (const auto& d : done) {
      infeasible += d.branch_count(Branch::Infeasible);
      feasible += d.branch_count(Branch::Feasible);
    }
    const auto num = csv_number;
    out += to_string(h.header.algorithm) + "," + num(h.header.alpha) + "," + num(h.header.alpha_m) + "," +
           std::to_string(done.size()) + "," + std::to_string(h.folds.size() - done.size()) + "," +
           num(s.r2_train.mean) + "," + num(s.r2_train.std) + "," + num(s.r2_test.mean) + "," + num(s.r2_test.std) +
           "," + num(s.c_train.mean) + "," + num(s.c_train.std) + "," + num(s.c_test.mean) + "," +
           num(s.c_test.std) + "," + std::to_string(infeasible) + "," + std::to_string(feasible) + "," +
           h.header.verdict.label() + "\n";
  }
  return out;
}

std::string summary_json(const ExperimentConfig& cfg, std::uint64_t seed, const std::vector<HistoryFile>& histories,
                         const std::vector<std::string>& names) {
  JsonWriter w;
  w.begin_object();
  w.key("dataset").value(cfg.dataset.path);
  w.key("target").value(cfg.dataset.target);
  w.key("loss").value(to_string(cfg.run.loss.kind));
  w.key("learner").value(to_string(cfg.run.learner.kind));
  w.key("k").value(cfg.run.k);
  w.key("seed").value(static_cast<std::size_t>(seed));
  w.key("iterations").value(cfg.run.iterations);
  w.key("beta").value(cfg.run.beta);
  w.key("normalization").value(to_string(cfg.run.normalization));
  w.key("std").value("population");
  w.key("runs").begin_array();
  for (std::size_t i = 0; i < histories.size(); ++i) {
    const auto& h = histories[i];
    const auto done = h.completed();
    FoldSummary s;
    if (!done.empty()) s = summarize_folds(done);
    const auto pair = [&](const char* key, const MeanStd& m) {
      w.key(key).begin_object().key("mean").value(m.mean).key("std").value(m.std).end_object();
    };
    w.begin_object();
    w.key("history").value(names[i]);
    w.key("algorithm").value(to_string(h.header.algorithm));
    w.key("alpha").value(h.header.alpha);
    w.key("alpha_m").value(h.header.alpha_m);
    w.key("folds").value(done.size());
    w.key("failed_folds").value(h.folds.size() - done.size());
    pair("r2_train", s.r2_train);
    pair("r2_test", s.r2_test);
    pair("c_train", s.c_train);
    pair("c_test", s.c_test);
    w.key("fold_r2_train").begin_array();
    for (const auto& d : done) w.value(d.records.empty() ? d.initial_r2_train : d.records.back().r2_train);
    w.end_array();
    w.key("fold_c_train").begin_array();
    for (const auto& d : done) w.value(d.records.empty() ? d.initial_c_train : d.records.back().c_train);
    w.end_array();
    w.key("verdict").value(h.header.verdict.label());
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str() + "\n";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options) {
  ExperimentConfig cfg = config;
  if (options.seed) cfg.run.seed = *options.seed;
  const auto data = prepare_data(cfg);
  const auto folds = make_folds(cfg, data);

  std::vector<std::shared_ptr<const ConstraintSet>> constraints(folds.size());
  std::vector<double> epsilons(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) constraints[f] = fold_constraints(cfg, folds[f].train, epsilons[f]);

  ExperimentResult result;
  std::vector<Job> jobs;
  for (auto algorithm : cfg.run.algorithms) {
    for (double alpha : cfg.run.alphas) {
      HistoryFile file;
      auto& h = file.header;
      h.algorithm = algorithm;
      h.alpha = alpha;
      h.alpha_m = algorithm == Algorithm::MovingTargets ? alpha_convert(alpha)
                                                        : std::numeric_limits<double>::quiet_NaN();
      h.beta = cfg.run.beta;
      h.loss = cfg.run.loss;
      h.learner = cfg.run.learner.kind;
      h.dataset = cfg.dataset.path;
      h.target = cfg.dataset.target;
      h.k = cfg.run.k;
      h.seed = cfg.run.seed;
      h.iterations = cfg.run.iterations;
      h.normalization = to_string(cfg.run.normalization);
      h.verdict = check_contraction_condition(cfg.run.loss, alpha);
      file.folds.resize(folds.size());
      for (std::size_t f = 0; f < folds.size(); ++f) jobs.push_back(Job{result.histories.size(), f, algorithm, alpha});
      result.histories.push_back(std::move(file));
    }
  }

  const auto execute = [&](const Job& job) {
    auto& slot = result.histories[job.history].folds[job.fold];
    slot.fold = job.fold;
    slot.n_train = folds[job.fold].train.n();
    slot.n_test = folds[job.fold].test.n();
    slot.epsilon = epsilons[job.fold];
    RunConfig rc;
    rc.algorithm = job.algorithm;
    rc.alpha = job.alpha;
    rc.beta = cfg.run.beta;
    rc.iterations = cfg.run.iterations;
    rc.loss = cfg.run.loss;
    rc.learner = cfg.run.learner;
    rc.constraints = constraints[job.fold];
    rc.membership_tolerance = cfg.run.membership_tolerance;
    rc.seed = cfg.run.seed;
    rc.early_stop = cfg.run.early_stop;
    rc.stop_tolerance = cfg.run.stop_tolerance;
    rc.fail_hard = cfg.run.fail_hard;
    rc.solver = cfg.solver;
    rc.keep_vectors = cfg.output.include_vectors;
    const std::string label =
        to_string(job.algorithm) + " alpha=" + alpha_tag(job.alpha) + " fold=" + std::to_string(job.fold);
    try {
      slot.history = run(rc, folds[job.fold].train, folds[job.fold].test);
      slot.ok = true;
      log::info("finished " + label);
    } catch (const std::exception& e) {
      slot.ok = false;
      slot.error = e.what();
      slot.history = IterationHistory{};
      log::error("run failed (" + label + "): " + e.what());
    }
  };

  unsigned workers = options.jobs > 0 ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) execute(jobs[i]);
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Failed folds keep the run-level fields so the serialized file stays self-describing.
  for (auto& file : result.histories)
    for (auto& f : file.folds)
      if (!f.ok) {
        f.history.algorithm = file.header.algorithm;
        f.history.alpha = file.header.alpha;
        f.history.alpha_m = file.header.alpha_m;
        f.history.beta = file.header.beta;
        f.history.loss = file.header.loss;
        f.history.learner = file.header.learner;
        f.history.verdict = file.header.verdict;
        f.history.y_train_didi = f.history.y_test_didi = std::numeric_limits<double>::quiet_NaN();
        f.history.initial_r2_train = f.history.initial_r2_test = std::numeric_limits<double>::quiet_NaN();
        f.history.initial_c_train = f.history.initial_c_test = std::numeric_limits<double>::quiet_NaN();
        ++result.failed_runs;
      }

  result.out_dir = options.out_dir ? *options.out_dir : cfg.output.resolved_directory;
  std::filesystem::create_directories(result.out_dir / "histories");
  std::vector<std::string> names;
  for (const auto& file : result.histories) {
    const std::string name =
        "histories/" + to_string(file.header.algorithm) + "_alpha" + alpha_tag(file.header.alpha) + ".jsonl";
    names.push_back(name);
    write_text(result.out_dir / name, write_history(file));
    result.files.push_back(result.out_dir / name);
  }
  write_text(result.out_dir / "summary.csv", summary_csv(result.histories));
  result.files.push_back(result.out_dir / "summary.csv");
  write_text(result.out_dir / "summary.json", summary_json(cfg, cfg.run.seed, result.histories, names));
  result.files.push_back(result.out_dir / "summary.json");
  return result;
}

std::string compare_histories(const HistoryFile& a, const HistoryFile& m) {
  std::string reason;
  if (!a.header.same_protocol(m.header, reason))
    throw std::invalid_argument("histories do not share a protocol: " + reason);
  const auto da = a.completed();
  const auto dm = m.completed();
  if (da.empty() || dm.empty()) throw std::invalid_argument("a history has no completed folds");
  const auto sa = summarize_folds(da);
  const auto sm = summarize_folds(dm);

  std::string out = "metric,split,mean_a,std_a,mean_m,std_m,flag\n";
  const auto row = [&](const char* metric, const char* split, const MeanStd& x, const MeanStd& y, Direction dir) {
    const auto flag = (std::isfinite(x.mean) && std::isfinite(y.mean))
                          ? to_string(significance_flag(x.mean, x.std, y.mean, y.std, dir))
                          : std::string("undefined");
    out += std::string(metric) + "," + split + "," + csv_number(x.mean) + "," + csv_number(x.std) + "," +
           csv_number(y.mean) + "," + csv_number(y.std) + "," + flag + "\n";
  };
  row("r2", "train", sa.r2_train, sm.r2_train, Direction::HigherBetter);
  row("r2", "test", sa.r2_test, sm.r2_test, Direction::HigherBetter);
  row("c", "train", sa.c_train, sm.c_train, Direction::LowerBetter);
  row("c", "test", sa.c_test, sm.c_test, Direction::LowerBetter);
  return out;
}

std::string plot_data(const HistoryFile& history) {
  const auto done = history.completed();
  if (done.empty()) throw std::invalid_argument("history has no completed folds");
  const auto s = summarize_folds(done);
  std::string out = "iteration,r2_mean,r2_std,c_mean,c_std,residual_mean\n";
  for (std::size_t i = 0; i < s.r2_train_curve.size(); ++i) {
    out += std::to_string(done.front().records[i].iteration) + "," + csv_number(s.r2_train_curve[i].mean) + "," +
           csv_number(s.r2_train_curve[i].std) + "," + csv_number(s.c_train_curve[i].mean) + "," +
           csv_number(s.c_train_curve[i].std) + "," + csv_number(s.residual_curve[i].mean) + "\n";
  }
  return out;
}

}  // namespace confit
