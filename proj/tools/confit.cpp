// confit: constrained regression experiments from a JSON config.
//
//   confit run --config configs/student.json [--out DIR] [--jobs N] [--seed S]
//   confit compare HISTORY_A HISTORY_M [--out FILE]
//   confit plotdata HISTORY [--out FILE]
//   confit validate-config --config PATH
//
// Exit codes: 0 success, 1 runtime failure, 2 config or usage error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "confit/experiment.hpp"
#include "confit/log.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigError = 2;

int emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return kOk;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return kRuntimeFailure;
  }
  out << text;
  return kOk;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, unsigned jobs,
            const std::optional<std::uint64_t>& seed) {
  const auto cfg = confit::load_config(config_path);
  confit::ExperimentOptions options;
  if (!out_dir.empty()) options.out_dir = out_dir;
  options.seed = seed;
  options.jobs = jobs;
  const auto result = confit::run_experiment(cfg, options);
  for (const auto& f : result.files) confit::log::info("wrote " + f.string());
  std::cout << "wrote " << result.files.size() << " files to " << result.out_dir.string() << "\n";
  if (result.failed_runs > 0) {
    std::cerr << "error: " << result.failed_runs << " run(s) failed; see the fold records\n";
    return kRuntimeFailure;
  }
  return kOk;
}

int cmd_validate(const std::string& config_path) {
  const auto cfg = confit::load_config(config_path);
  const auto data = confit::prepare_data(cfg);
  if (cfg.run.k > static_cast<std::size_t>(data.numeric.rows()))
    throw confit::ConfigError("run.k", "exceeds the number of rows (" + std::to_string(data.numeric.rows()) + ")");
  std::cout << "config ok: " << data.numeric.rows() << " rows, " << data.numeric.cols() - 1 << " features";
  if (data.dropped_rows > 0) std::cout << ", " << data.dropped_rows << " rows dropped";
  std::cout << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  confit::log::set_level(confit::log::level_from_env());

  CLI::App app{"Constrained regression by iterative target adjustment"};
  app.require_subcommand(1);

  std::string config_path, out_dir, history_a, history_m, history, out_file;
  unsigned jobs = 0;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run every (algorithm, alpha, fold) of an experiment config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--jobs", jobs, "Worker threads (default: hardware threads)");
  run->add_option("--seed", seed, "Fold seed (overrides the config)");

  auto* compare = app.add_subcommand("compare", "Compare two histories with the mean/std significance rule");
  compare->add_option("history_a", history_a, "History of algorithm A (JSONL)")->required();
  compare->add_option("history_m", history_m, "History of algorithm M (JSONL)")->required();
  compare->add_option("--out", out_file, "Write the CSV table here instead of stdout");

  auto* plot = app.add_subcommand("plotdata", "Per-iteration mean/std curves of one history (CSV)");
  plot->add_option("history", history, "History file (JSONL)")->required();
  plot->add_option("--out", out_file, "Write the CSV here instead of stdout");

  auto* validate = app.add_subcommand("validate-config", "Check a config and its dataset without running");
  validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, jobs, seed);
    if (*validate) return cmd_validate(config_path);
    if (*compare) {
      const auto a = confit::read_history_file(history_a);
      const auto m = confit::read_history_file(history_m);
      return emit(confit::compare_histories(a, m), out_file);
    }
    if (*plot) return emit(confit::plot_data(confit::read_history_file(history)), out_file);
  } catch (const confit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kRuntimeFailure;
}
