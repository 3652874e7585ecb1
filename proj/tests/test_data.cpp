#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>

#include "confit/data.hpp"

using namespace confit;

namespace {

std::vector<double> column(const RawTable& t, std::size_t c) {
  std::vector<double> out;
  for (const auto& row : t.rows) out.push_back(*row[c].number);
  return out;
}

}  // namespace

TEST_CASE("csv parsing") {
  const auto t = parse_csv("a,b,target\n1,2,3\n4,5,6\n7,8,9\n");
  CHECK(t.n() == 3);
  CHECK(t.d() == 3);
  CHECK(t.rows[2][1].number == 8.0);

  const auto dropped = parse_csv("a,b,target\n1,2,3\n4,,6\n7,8,9\n");
  CHECK(dropped.n() == 2);
  CHECK(dropped.dropped_rows == 1);

  CHECK_THROWS_WITH_AS(parse_csv(""), "empty table", DataError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,2\n3\n"), ParseError);
  try {
    parse_csv("a,b\n1,2\n3\n");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("csv quoting and column selection") {
  const auto t = parse_csv("name,x\n\"a, b\",1\n\"say \"\"hi\"\"\",2\n");
  CHECK(t.rows[0][0].text == "a, b");
  CHECK(t.rows[1][0].text == "say \"hi\"");
  CHECK_THROWS_AS(parse_csv("name,x\n\"open,1\n"), ParseError);

  CsvSchema schema;
  schema.dropped = {"x"};
  const auto d = parse_csv("name,x,y\nq,,1\n", schema);
  CHECK(d.d() == 2);
  CHECK(d.n() == 1);
  CHECK_THROWS_AS(parse_csv("a,a\n1,2\n"), ParseError);
}

TEST_CASE("ordinal encoding by first appearance") {
  const auto t = ordinal_encode(parse_csv("s,v\nm,1\nf,2\nm,3\n"), {0});
  CHECK(column(t, 0) == std::vector<double>{0, 1, 0});
  CHECK(t.encodings.at("s") == std::vector<std::string>{"m", "f"});
  CHECK(column(ordinal_encode(parse_csv("s\nx\n"), {0}), 0) == std::vector<double>{0});
  CHECK(column(ordinal_encode(parse_csv("s\nb\na\nb\nc\n"), {0}), 0) == std::vector<double>{0, 1, 0, 2});
}

TEST_CASE("min-max normalization") {
  const auto d = normalize(parse_csv("x,c,y\n2,5,0\n4,5,1\n6,5,2\n"), 2);
  CHECK(d.X(0, 0) == 0.0);
  CHECK(d.X(1, 0) == 0.5);
  CHECK(d.X(2, 0) == 1.0);
  CHECK(d.X.col(1).isZero());
  CHECK(d.y[2] == 1.0);
  CHECK(inverse_target(d, d.y)[1] == doctest::Approx(1.0));

  const auto again = normalize(parse_csv("x,y\n0,0\n0.25,0.5\n1,1\n"), 1);
  CHECK(again.X(1, 0) == doctest::Approx(0.25));

  CHECK_THROWS_AS(numeric_matrix(parse_csv("x,y\n1,a\n")), DataError);
}

TEST_CASE("scales fitted on a subset extrapolate outside [0,1]") {
  Eigen::MatrixXd m(3, 2);
  m << 0, 0, 10, 10, 20, 20;
  std::vector<ColumnScale> fs;
  ColumnScale ts;
  fit_scales(m, {0, 1}, 1, fs, ts);
  const auto d = apply_scales(m, 1, {"x", "y"}, fs, ts);
  CHECK(d.X(2, 0) == 2.0);
  CHECK(d.y[2] == 2.0);
}

TEST_CASE("protected grouping") {
  Dataset d;
  d.X.resize(4, 1);
  d.X << 0, 1, 0, 1;
  d.y = Eigen::VectorXd::Zero(4);
  const auto g = build_protected(d, {0});
  REQUIRE(g.size() == 1);
  CHECK(g[0].groups.at(0.0) == std::vector<std::size_t>{0, 2});
  CHECK(g[0].groups.at(1.0) == std::vector<std::size_t>{1, 3});

  d.X << 0, 0, 0, 0;
  CHECK(build_protected(d, {0})[0].group_count() == 1);

  d.X << 0.1, 0.2, 0.3, 0.4;
  CHECK_THROWS_AS(build_protected(d, {0}), DataError);
}

TEST_CASE("subsets rebuild protected groups") {
  Dataset d;
  d.X.resize(5, 1);
  d.X << 0, 1, 0, 1, 1;
  d.y = Eigen::VectorXd::LinSpaced(5, 0, 4);
  d.protected_features = build_protected(d, {0});
  const auto s = d.subset({4, 0, 1});
  CHECK(s.y[0] == 4.0);
  CHECK(s.protected_features[0].groups.at(1.0) == std::vector<std::size_t>{0, 2});
  CHECK(s.protected_features[0].groups.at(0.0) == std::vector<std::size_t>{1});
}

TEST_CASE("k-fold partition") {
  const auto even = kfold_indices(10, 5, 3);
  for (const auto& f : even) CHECK(f.test.size() == 2);

  const auto odd = kfold_indices(11, 5, 3);
  std::vector<std::size_t> sizes;
  std::set<std::size_t> seen;
  for (const auto& f : odd) {
    sizes.push_back(f.test.size());
    CHECK(f.train.size() + f.test.size() == 11);
    seen.insert(f.test.begin(), f.test.end());
  }
  CHECK(sizes == std::vector<std::size_t>{3, 2, 2, 2, 2});
  CHECK(seen.size() == 11);

  const auto again = kfold_indices(11, 5, 3);
  for (std::size_t f = 0; f < 5; ++f) CHECK(again[f].test == odd[f].test);
  CHECK(kfold_indices(11, 5, 4)[0].test != odd[0].test);

  CHECK_THROWS_AS(kfold_indices(4, 5, 0), DataError);
  CHECK_THROWS_AS(kfold_indices(4, 1, 0), DataError);
}

TEST_CASE("seeded permutation is a permutation") {
  auto p = seeded_permutation(100, 99);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == i);
}
