#include "confit/history_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace confit {

using nlohmann::json;

std::string format_double(double value) {
  if (!std::isfinite(value)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void JsonWriter::separate() {
  if (after_key_) {
    after_key_ = false;
    return;
  }
  if (!first_.empty()) {
    if (!first_.back()) out_.push_back(',');
    first_.back() = false;
  }
}

JsonWriter& JsonWriter::begin_object() {
  separate();
  out_.push_back('{');
  first_.push_back(true);
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  out_.push_back('}');
  first_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  separate();
  out_.push_back('[');
  first_.push_back(true);
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  out_.push_back(']');
  first_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::key(std::string_view name) {
  value(name);
  out_.push_back(':');
  after_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(double v) {
  separate();
  out_ += format_double(v);
  return *this;
}

JsonWriter& JsonWriter::value(int v) {
  separate();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::size_t v) {
  separate();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  separate();
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::value(std::string_view v) {
  separate();
  out_.push_back('"');
  for (char c : v) {
    switch (c) {
      case '"': out_ += "\\\""; break;
      case '\\': out_ += "\\\\"; break;
      case '\n': out_ += "\\n"; break;
      case '\r': out_ += "\\r"; break;
      case '\t': out_ += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(c));
          out_ += buf;
        } else {
          out_.push_back(c);
        }
    }
  }
  out_.push_back('"');
  return *this;
}

JsonWriter& JsonWriter::value(const Eigen::VectorXd& v) {
  begin_array();
  for (Eigen::Index i = 0; i < v.size(); ++i) value(v[i]);
  return end_array();
}

JsonWriter& JsonWriter::null() {
  separate();
  out_ += "null";
  return *this;
}

bool HistoryHeader::same_protocol(const HistoryHeader& o, std::string& reason) const {
  if (dataset != o.dataset) reason = "dataset differs";
  else if (target != o.target) reason = "target differs";
  else if (!(loss == o.loss)) reason = "loss differs";
  else if (k != o.k) reason = "fold count differs";
  else if (seed != o.seed) reason = "seed differs";
  else if (iterations != o.iterations) reason = "iteration count differs";
  else if (normalization != o.normalization) reason = "normalization differs";
  else return true;
  return false;
}

std::vector<IterationHistory> HistoryFile::completed() const {
  std::vector<IterationHistory> out;
  for (const auto& f : folds)
    if (f.ok) out.push_back(f.history);
  return out;
}

namespace {

void write_header(JsonWriter& w, const HistoryHeader& h) {
  w.begin_object();
  w.key("type").value("header");
  w.key("algorithm").value(to_string(h.algorithm));
  w.key("alpha").value(h.alpha);
  w.key("alpha_m").value(h.alpha_m);
  w.key("beta").value(h.beta);
  w.key("loss").value(to_string(h.loss.kind));
  w.key("huber_threshold").value(h.loss.huber_threshold);
  w.key("learner").value(to_string(h.learner));
  w.key("dataset").value(h.dataset);
  w.key("target").value(h.target);
  w.key("k").value(h.k);
  w.key("seed").value(static_cast<std::size_t>(h.seed));
  w.key("iterations").value(h.iterations);
  w.key("normalization").value(h.normalization);
  w.key("std").value("population");
  w.key("verdict").begin_object();
  w.key("label").value(h.verdict.label());
  w.key("bound");
  if (h.verdict.bound) w.value(*h.verdict.bound);
  else w.null();
  w.key("note").value(h.verdict.note);
  w.end_object();
  w.end_object();
}

void write_fold(JsonWriter& w, const FoldRun& f) {
  const auto& h = f.history;
  w.begin_object();
  w.key("type").value("fold");
  w.key("fold").value(f.fold);
  w.key("status").value(f.ok ? "ok" : "error");
  w.key("error").value(f.error);
  w.key("n_train").value(f.n_train);
  w.key("n_test").value(f.n_test);
  w.key("epsilon").value(f.epsilon);
  w.key("y_train_didi").value(h.y_train_didi);
  w.key("y_test_didi").value(h.y_test_didi);
  w.key("initial").begin_object();
  w.key("r2_train").value(h.initial_r2_train);
  w.key("r2_test").value(h.initial_r2_test);
  w.key("c_train").value(h.initial_c_train);
  w.key("c_test").value(h.initial_c_test);
  w.key("prediction").value(h.initial_prediction);
  w.end_object();
  w.key("early_stopped").value(h.early_stopped);
  w.end_object();
}

void write_record(JsonWriter& w, std::size_t fold, const IterationRecord& r) {
  w.begin_object();
  w.key("type").value("iteration");
  w.key("fold").value(fold);
  w.key("iteration").value(r.iteration);
  w.key("branch").value(to_string(r.branch));
  w.key("r2_train").value(r.r2_train);
  w.key("r2_test").value(r.r2_test);
  w.key("c_train").value(r.c_train);
  w.key("c_test").value(r.c_test);
  w.key("residual").value(r.residual);
  w.key("contraction_ratio").value(r.contraction_ratio);
  w.key("solver").begin_object();
  w.key("iterations").value(r.solve.iterations);
  w.key("primal_residual").value(r.solve.primal_residual);
  w.key("dual_residual").value(r.solve.dual_residual);
  w.key("converged").value(r.solve.converged);
  w.key("polished").value(r.solve.polished);
  w.key("fallback").value(r.solve.fallback);
  w.end_object();
  w.key("z").value(r.z);
  w.key("prediction").value(r.prediction);
  w.key("prediction_test").value(r.prediction_test);
  w.end_object();
}

double number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw HistoryFormatError(std::string("missing field '") + key + "'");
  if (it->is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!it->is_number()) throw HistoryFormatError(std::string("field '") + key + "' is not a number");
  return it->get<double>();
}

template <typename T>
T field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw HistoryFormatError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw HistoryFormatError(std::string("field '") + key + "' has the wrong type");
  }
}

Eigen::VectorXd vector_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array()) throw HistoryFormatError(std::string("missing array '") + key + "'");
  Eigen::VectorXd v(static_cast<Eigen::Index>(it->size()));
  Eigen::Index i = 0;
  for (const auto& e : *it) v[i++] = e.is_null() ? std::numeric_limits<double>::quiet_NaN() : e.get<double>();
  return v;
}

HistoryHeader parse_header(const json& j) {
  HistoryHeader h;
  h.algorithm = parse_algorithm(field<std::string>(j, "algorithm"));
  h.alpha = number(j, "alpha");
  h.alpha_m = number(j, "alpha_m");
  h.beta = number(j, "beta");
  h.loss.kind = parse_loss_kind(field<std::string>(j, "loss"));
  h.loss.huber_threshold = number(j, "huber_threshold");
  h.learner = parse_learner_kind(field<std::string>(j, "learner"));
  h.dataset = field<std::string>(j, "dataset");
  h.target = field<std::string>(j, "target");
  h.k = field<std::size_t>(j, "k");
  h.seed = field<std::uint64_t>(j, "seed");
  h.iterations = field<int>(j, "iterations");
  h.normalization = field<std::string>(j, "normalization");
  const auto& v = j.at("verdict");
  h.verdict.guaranteed = field<std::string>(v, "label") == "guaranteed";
  if (!v.at("bound").is_null()) h.verdict.bound = v.at("bound").get<double>();
  h.verdict.note = field<std::string>(v, "note");
  return h;
}

FoldRun parse_fold(const json& j, const HistoryHeader& header) {
  FoldRun f;
  f.fold = field<std::size_t>(j, "fold");
  f.ok = field<std::string>(j, "status") == "ok";
  f.error = field<std::string>(j, "error");
  f.n_train = field<std::size_t>(j, "n_train");
  f.n_test = field<std::size_t>(j, "n_test");
  f.epsilon = number(j, "epsilon");
  auto& h = f.history;
  h.algorithm = header.algorithm;
  h.alpha = header.alpha;
  h.alpha_m = header.alpha_m;
  h.beta = header.beta;
  h.loss = header.loss;
  h.learner = header.learner;
  h.verdict = header.verdict;
  h.y_train_didi = number(j, "y_train_didi");
  h.y_test_didi = number(j, "y_test_didi");
  const auto& init = j.at("initial");
  h.initial_r2_train = number(init, "r2_train");
  h.initial_r2_test = number(init, "r2_test");
  h.initial_c_train = number(init, "c_train");
  h.initial_c_test = number(init, "c_test");
  h.initial_prediction = vector_field(init, "prediction");
  h.early_stopped = field<bool>(j, "early_stopped");
  return f;
}

IterationRecord parse_record(const json& j) {
  IterationRecord r;
  r.iteration = field<int>(j, "iteration");
  r.branch = parse_branch(field<std::string>(j, "branch"));
  r.r2_train = number(j, "r2_train");
  r.r2_test = number(j, "r2_test");
  r.c_train = number(j, "c_train");
  r.c_test = number(j, "c_test");
  r.residual = number(j, "residual");
  r.contraction_ratio = number(j, "contraction_ratio");
  const auto& s = j.at("solver");
  r.solve.iterations = field<int>(s, "iterations");
  r.solve.primal_residual = number(s, "primal_residual");
  r.solve.dual_residual = number(s, "dual_residual");
  r.solve.converged = field<bool>(s, "converged");
  r.solve.polished = field<bool>(s, "polished");
  r.solve.fallback = field<bool>(s, "fallback");
  r.z = vector_field(j, "z");
  r.prediction = vector_field(j, "prediction");
  r.prediction_test = vector_field(j, "prediction_test");
  return r;
}

}  // namespace

void write_history(std::ostream& out, const HistoryFile& file) {
  {
    JsonWriter w;
    write_header(w, file.header);
    out << w.str() << '\n';
  }
  for (const auto& fold : file.folds) {
    JsonWriter w;
    write_fold(w, fold);
    out << w.str() << '\n';
    for (const auto& r : fold.history.records) {
      JsonWriter wr;
      write_record(wr, fold.fold, r);
      out << wr.str() << '\n';
    }
  }
}

std::string write_history(const HistoryFile& file) {
  std::ostringstream out;
  write_history(out, file);
  return out.str();
}

HistoryFile read_history(std::istream& in) {
  HistoryFile file;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto type = field<std::string>(j, "type");
      if (type == "header") {
        if (have_header) throw HistoryFormatError("more than one history in the file; expected one history per file");
        file.header = parse_header(j);
        have_header = true;
      } else if (!have_header) {
        throw HistoryFormatError("record before header");
      } else if (type == "fold") {
        file.folds.push_back(parse_fold(j, file.header));
      } else if (type == "iteration") {
        const auto fold = field<std::size_t>(j, "fold");
        if (file.folds.empty() || file.folds.back().fold != fold)
          throw HistoryFormatError("iteration record for fold " + std::to_string(fold) + " outside its fold block");
        file.folds.back().history.records.push_back(parse_record(j));
      } else {
        throw HistoryFormatError("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw HistoryFormatError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const HistoryFormatError& e) {
      throw HistoryFormatError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw HistoryFormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw HistoryFormatError("no history header found");
  return file;
}

HistoryFile read_history_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw HistoryFormatError("cannot open history file " + path);
  return read_history(in);
}

}  // namespace confit
