#include "confit/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace confit {

namespace {

bool is_missing(const std::string& raw) {
  return raw.empty() || raw == "NA" || raw == "NaN" || raw == "nan" || raw == "?" || raw == "null";
}

std::optional<double> parse_number(const std::string& raw) {
  if (raw.empty()) return std::nullopt;
  const char* begin = raw.c_str();
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(begin, &end);
  if (end == begin || errno == ERANGE) return std::nullopt;
  while (*end == ' ' || *end == '\t') ++end;
  if (*end != '\0' || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

// Splits RFC-4180 text into records; each record remembers its starting line.
struct Record {
  std::vector<std::string> fields;
  std::size_t line;
};

std::vector<Record> split_records(const std::string& text) {
  std::vector<Record> records;
  Record current{{}, 1};
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  bool record_has_content = false;

  const auto end_field = [&] {
    current.fields.push_back(field_was_quoted ? field : trim(field));
    field.clear();
    field_was_quoted = false;
  };
  const auto end_record = [&] {
    end_field();
    if (record_has_content) records.push_back(std::move(current));
    current = Record{{}, line};
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!trim(field).empty()) throw ParseError("malformed CSV: quote inside unquoted field", line);
        field.clear();
        in_quotes = true;
        field_was_quoted = true;
        record_has_content = true;
        break;
      case ',':
        end_field();
        record_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(c);
        if (c != ' ' && c != '\t') record_has_content = true;
        break;
    }
  }
  if (in_quotes) throw ParseError("malformed CSV: unterminated quoted field", current.line);
  end_record();
  return records;
}

std::vector<ProtectedSpec> group_columns(const Eigen::MatrixXd& X, const std::vector<std::size_t>& features,
                                         bool enforce_discrete) {
  std::vector<ProtectedSpec> out;
  const std::size_t n = static_cast<std::size_t>(X.rows());
  for (std::size_t p : features) {
    if (p >= static_cast<std::size_t>(X.cols()))
      throw DataError("protected feature index " + std::to_string(p) + " out of range");
    ProtectedSpec spec;
    spec.feature_index = p;
    for (std::size_t r = 0; r < n; ++r) spec.groups[X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p))].push_back(r);
    if (enforce_discrete && spec.groups.size() > n / 2 && spec.groups.size() > 1)
      throw DataError("feature " + std::to_string(p) + " appears continuous, refuse protected grouping");
    out.push_back(std::move(spec));
  }
  return out;
}

}  // namespace

Cell Cell::from_text(std::string raw) {
  Cell cell;
  cell.number = parse_number(raw);
  cell.text = std::move(raw);
  return cell;
}

Cell Cell::from_number(double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  return Cell{os.str(), value};
}

std::size_t RawTable::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw DataError("unknown column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

RawTable parse_csv(const std::string& text, const CsvSchema& schema) {
  auto records = split_records(text);
  if (records.empty()) throw DataError("empty table");

  const auto& header = records.front();
  {
    std::set<std::string> seen;
    for (const auto& name : header.fields) {
      if (name.empty()) throw ParseError("malformed CSV: empty column name", header.line);
      if (!seen.insert(name).second) throw ParseError("malformed CSV: duplicate column '" + name + "'", header.line);
    }
  }
  const auto header_index = [&](const std::string& name) {
    const auto it = std::find(header.fields.begin(), header.fields.end(), name);
    if (it == header.fields.end()) throw DataError("unknown column '" + name + "'");
    return static_cast<std::size_t>(it - header.fields.begin());
  };

  std::vector<std::size_t> keep;
  if (!schema.retained.empty()) {
    for (const auto& name : schema.retained) keep.push_back(header_index(name));
  } else {
    std::set<std::size_t> drop;
    for (const auto& name : schema.dropped) drop.insert(header_index(name));
    for (std::size_t c = 0; c < header.fields.size(); ++c)
      if (!drop.count(c)) keep.push_back(c);
  }
  if (keep.empty()) throw DataError("no columns retained");

  RawTable table;
  for (std::size_t c : keep) table.columns.push_back(header.fields[c]);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.fields.size())
      throw ParseError("malformed CSV: expected " + std::to_string(header.fields.size()) + " fields, got " +
                           std::to_string(rec.fields.size()),
                       rec.line);
    std::vector<Cell> row;
    row.reserve(keep.size());
    bool missing = false;
    for (std::size_t c : keep) {
      if (is_missing(rec.fields[c])) {
        missing = true;
        break;
      }
      row.push_back(Cell::from_text(rec.fields[c]));
    }
    if (missing) {
      ++table.dropped_rows;
      continue;
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw DataError("empty table");
  return table;
}

RawTable load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), schema);
}

RawTable ordinal_encode(const RawTable& table, const std::vector<std::size_t>& categorical_columns) {
  RawTable out = table;
  for (std::size_t c : categorical_columns) {
    if (c >= table.d()) throw DataError("categorical column index " + std::to_string(c) + " out of range");
    std::unordered_map<std::string, std::size_t> codes;
    std::vector<std::string> order;
    for (auto& row : out.rows) {
      auto [it, inserted] = codes.emplace(row[c].text, order.size());
      if (inserted) order.push_back(row[c].text);
      row[c] = Cell::from_number(static_cast<double>(it->second));
    }
    out.encodings[table.columns[c]] = std::move(order);
  }
  return out;
}

Eigen::MatrixXd numeric_matrix(const RawTable& table) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.n()), static_cast<Eigen::Index>(table.d()));
  for (std::size_t r = 0; r < table.n(); ++r) {
    for (std::size_t c = 0; c < table.d(); ++c) {
      const auto& cell = table.rows[r][c];
      if (!cell.number)
        throw DataError("non-numeric cell '" + cell.text + "' in column '" + table.columns[c] + "' at row " +
                        std::to_string(r + 1));
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *cell.number;
    }
  }
  return m;
}

void fit_scales(const Eigen::MatrixXd& numeric, const std::vector<std::size_t>& rows, std::size_t target_column,
                std::vector<ColumnScale>& feature_scales, ColumnScale& target_scale) {
  if (rows.empty()) throw DataError("cannot fit normalization on zero rows");
  feature_scales.clear();
  for (Eigen::Index c = 0; c < numeric.cols(); ++c) {
    ColumnScale scale{numeric(static_cast<Eigen::Index>(rows[0]), c), numeric(static_cast<Eigen::Index>(rows[0]), c)};
    for (std::size_t r : rows) {
      const double v = numeric(static_cast<Eigen::Index>(r), c);
      scale.min = std::min(scale.min, v);
      scale.max = std::max(scale.max, v);
    }
    if (static_cast<std::size_t>(c) == target_column) target_scale = scale;
    else feature_scales.push_back(scale);
  }
}

Dataset apply_scales(const Eigen::MatrixXd& numeric, std::size_t target_column, const std::vector<std::string>& columns,
                     const std::vector<ColumnScale>& feature_scales, const ColumnScale& target_scale) {
  if (target_column >= static_cast<std::size_t>(numeric.cols())) throw DataError("target column out of range");
  if (numeric.cols() < 2) throw DataError("dataset needs at least one feature besides the target");
  Dataset ds;
  const Eigen::Index n = numeric.rows();
  ds.X.resize(n, numeric.cols() - 1);
  ds.y.resize(n);
  ds.feature_scales = feature_scales;
  ds.target_scale = target_scale;
  ds.target_name = columns[target_column];
  Eigen::Index f = 0;
  for (Eigen::Index c = 0; c < numeric.cols(); ++c) {
    if (static_cast<std::size_t>(c) == target_column) {
      for (Eigen::Index r = 0; r < n; ++r) ds.y[r] = target_scale.forward(numeric(r, c));
      continue;
    }
    const auto& scale = feature_scales[static_cast<std::size_t>(f)];
    for (Eigen::Index r = 0; r < n; ++r) ds.X(r, f) = scale.forward(numeric(r, c));
    ds.feature_names.push_back(columns[static_cast<std::size_t>(c)]);
    ++f;
  }
  return ds;
}

Dataset normalize(const RawTable& table, std::size_t target_column) {
  const Eigen::MatrixXd numeric = numeric_matrix(table);
  std::vector<std::size_t> all(table.n());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<ColumnScale> feature_scales;
  ColumnScale target_scale;
  fit_scales(numeric, all, target_column, feature_scales, target_scale);
  return apply_scales(numeric, target_column, table.columns, feature_scales, target_scale);
}

Eigen::VectorXd inverse_target(const Dataset& dataset, const Eigen::VectorXd& normalized) {
  Eigen::VectorXd out(normalized.size());
  for (Eigen::Index i = 0; i < normalized.size(); ++i) out[i] = dataset.target_scale.inverse(normalized[i]);
  return out;
}

std::size_t Dataset::feature_index(const std::string& name) const {
  const auto it = std::find(feature_names.begin(), feature_names.end(), name);
  if (it == feature_names.end()) throw DataError("unknown feature '" + name + "'");
  return static_cast<std::size_t>(it - feature_names.begin());
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n()) throw DataError("row index out of range in subset");
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    out.y[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(rows[i])];
  }
  out.feature_names = feature_names;
  out.target_name = target_name;
  out.feature_scales = feature_scales;
  out.target_scale = target_scale;
  std::vector<std::size_t> features;
  for (const auto& p : protected_features) features.push_back(p.feature_index);
  out.protected_features = group_columns(out.X, features, false);
  return out;
}

std::vector<ProtectedSpec> build_protected(const Dataset& dataset, const std::vector<std::size_t>& feature_indices) {
  return group_columns(dataset.X, feature_indices, true);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 engine(seed);
  // Unbiased draw from [0, bound] by rejection on the top of the 64-bit range.
  const auto draw = [&engine](std::uint64_t bound) {
    const std::uint64_t range = bound + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t x;
    do {
      x = engine();
    } while (x >= limit);
    return x % range;
  };
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(draw(i - 1));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::vector<FoldIndices> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DataError("k-fold requires k >= 2");
  if (k > n) throw DataError("k-fold requires k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  const auto perm = seeded_permutation(n, seed);
  std::vector<FoldIndices> folds(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    std::vector<bool> in_test(n, false);
    for (std::size_t i = start; i < start + size; ++i) {
      folds[f].test.push_back(perm[i]);
      in_test[perm[i]] = true;
    }
    std::sort(folds[f].test.begin(), folds[f].test.end());
    for (std::size_t r = 0; r < n; ++r)
      if (!in_test[r]) folds[f].train.push_back(r);
    start += size;
  }
  return folds;
}

std::vector<Fold> kfold_split(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
  std::vector<Fold> out;
  for (const auto& idx : kfold_indices(dataset.n(), k, seed))
    out.push_back(Fold{dataset.subset(idx.train), dataset.subset(idx.test)});
  return out;
}

}  // namespace confit
