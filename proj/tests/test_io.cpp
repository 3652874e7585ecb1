#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "confit/experiment.hpp"
#include "confit/history_io.hpp"

using namespace confit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("confit_test_io_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_synthetic_csv(const fs::path& dir) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u;
  std::ofstream out(dir / "toy.csv");
  out << "group,x1,x2,target\n";
  for (int i = 0; i < 50; ++i) {
    const int g = i % 2;
    const double x1 = u(rng), x2 = u(rng);
    out << (g ? "b" : "a") << "," << x1 << "," << x2 << "," << 2.0 * x1 - x2 + 0.8 * g + 0.1 * u(rng) << "\n";
  }
  return dir / "toy.csv";
}

std::string smoke_config(const fs::path& csv, const fs::path& out) {
  return R"({
  "dataset": {"path": ")" + csv.string() + R"(", "target": "target", "protected": ["group"], "categorical": ["group"]},
  "constraints": {"didi_fraction": 0.2},
  "run": {"loss": "mse", "alphas": [0.5], "iterations": 30, "k": 2, "seed": 7,
          "learner": {"kind": "ridge", "lambda": 0.01}},
  "output": {"directory": ")" + out.string() + R"("}
})";
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + CONFIT_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_double(std::nan("")) == "null");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "null");
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  JsonWriter w;
  w.begin_object().key("a").value(1).key("b").begin_array().value(true).null().end_array().end_object();
  CHECK(w.str() == R"({"a":1,"b":[true,null]})");
}

TEST_CASE("config errors name the field") {
  const fs::path base = fs::current_path();
  try {
    parse_config(R"({"dataset": {"path": "x.csv", "target": "t", "colour": 1}, "run": {}})", base);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "dataset.colour");
  }
  try {
    parse_config(R"({"dataset": {"path": "x.csv", "target": "t"}, "run": {"alphas": [0.5, 1.0]}})", base);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "run.alphas[1]");
  }
  CHECK_THROWS_AS(parse_config("{not json", base), ConfigError);
  const auto cfg = parse_config(R"({"dataset": {"path": "/nonexistent/x.csv", "target": "t"}, "run": {}})", base);
  CHECK_THROWS_AS(prepare_data(cfg), ConfigError);
}

TEST_CASE("experiment smoke run, history round trip, compare and plot data") {
  const auto dir = scratch("smoke");
  const auto csv = write_synthetic_csv(dir);
  const auto cfg = parse_config(smoke_config(csv, dir / "out"), dir);

  const auto start = std::chrono::steady_clock::now();
  const auto result = run_experiment(cfg, ExperimentOptions{std::nullopt, std::nullopt, 1});
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 10.0);
  CHECK(result.failed_runs == 0);
  REQUIRE(result.histories.size() == 2);
  CHECK(fs::exists(dir / "out" / "summary.json"));
  CHECK(fs::exists(dir / "out" / "summary.csv"));

  const auto path = dir / "out" / "histories" / "affine_extension_alpha0.5.jsonl";
  REQUIRE(fs::exists(path));
  const std::string text = read_text(path);
  std::istringstream in(text);
  const auto h = read_history(in);
  CHECK(write_history(h) == text);
  CHECK(h.folds.size() == 2);
  CHECK(h.header.k == 2);

  std::istringstream twice(text + text);
  CHECK_THROWS_AS(read_history(twice), HistoryFormatError);

  const auto table = compare_histories(h, h);
  CHECK(table.find("A-better") == std::string::npos);
  CHECK(table.find("M-better") == std::string::npos);

  auto single = h;
  single.folds.resize(1);
  const auto plot = plot_data(single);
  std::istringstream rows(plot);
  std::string line;
  std::getline(rows, line);
  CHECK(line == "iteration,r2_mean,r2_std,c_mean,c_std,residual_mean");
  int count = 0;
  while (std::getline(rows, line)) {
    ++count;
    std::vector<std::string> cells;
    std::stringstream cs(line);
    for (std::string c; std::getline(cs, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 6);
    CHECK(std::stod(cells[2]) == 0.0);
    CHECK(std::stod(cells[4]) == 0.0);
  }
  CHECK(count == 30);

  auto other = h;
  other.header.seed = 8;
  CHECK_THROWS_AS(compare_histories(h, other), std::invalid_argument);
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch("cli");
  const auto csv = write_synthetic_csv(dir);
  {
    std::ofstream(dir / "ok.json") << smoke_config(csv, dir / "out");
    std::ofstream(dir / "missing.json") << smoke_config(dir / "absent.csv", dir / "out");
  }
  CHECK(run_cli("validate-config --config \"" + (dir / "ok.json").string() + "\"", dir / "a.log") == 0);

  CHECK(run_cli("validate-config --config \"" + (dir / "missing.json").string() + "\"", dir / "b.log") == 2);
  CHECK(read_text(dir / "b.log").find("absent.csv") != std::string::npos);

  CHECK(run_cli("run --config \"" + (dir / "ok.json").string() + "\" --bogus", dir / "c.log") == 2);
  CHECK(run_cli("frobnicate", dir / "d.log") == 2);
}
