// Command-line front end. Exit codes: 0 success, 1 runtime failure,
// 2 invalid input, 3 convergence condition not met.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "elsa/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kInvalid = 2;
constexpr int kConditionViolated = 3;

elsa::ExperimentConfig load_with_env(const std::string& path) {
  elsa::ExperimentConfig cfg = elsa::load_config(path);
  if (auto s = elsa::env_seed_override()) cfg.seed = *s;
  return cfg;
}

int cmd_run(const std::string& config, std::size_t jobs, const std::string& out) {
  const auto cfg = load_with_env(config);
  elsa::RunOptions opts;
  opts.jobs = jobs;
  if (!out.empty()) opts.out_dir = out;
  const auto res = elsa::run_experiment(cfg, opts);
  std::size_t failed = 0;
  for (const auto& r : res.rows) {
    if (r.aborted) {
      ++failed;
      std::cerr << "run " << elsa::to_string(r.method) << " sparsity " << r.sparsity << " seed " << r.seed
                << " failed: " << r.error << '\n';
    }
  }
  std::cout << "wrote " << res.rows.size() << " runs to " << res.out_dir << " (" << failed << " failed)\n";
  return res.any_failed ? kFailure : kOk;
}

int cmd_check(double beta, double mu, double gamma, double lam) {
  const elsa::ConvergenceParams p{beta, mu, lam, gamma};
  elsa::CheckReport r;
  try {
    r = elsa::check_conditions(p);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  std::cout << elsa::format_check_report(p, r);
  return r.satisfied() ? kOk : kConditionViolated;
}

int cmd_oracle(const std::string& config, const std::string& out) {
  const auto cfg = load_with_env(config);
  const auto entries = elsa::run_oracle(cfg);
  const std::filesystem::path dir(out.empty() ? cfg.output_dir : out);
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "oracle.json", std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (dir / "oracle.json").string());
  os << elsa::oracle_json(entries);
  for (const auto& e : entries) {
    std::cout << "seed " << e.seed << " sparsity " << e.sparsity << " k " << e.k << " loss " << e.loss << '\n';
  }
  return kOk;
}

int cmd_plot(const std::string& csv, const std::string& out, bool log_y) {
  std::ifstream is(csv, std::ios::binary);
  if (!is) throw elsa::ConfigError("cannot read summary CSV '" + csv + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  std::string svg;
  try {
    svg = elsa::plot_summary_csv(ss.str(), log_y);
  } catch (const std::invalid_argument& e) {
    throw elsa::ConfigError(e.what());
  }
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << svg;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparsity-constrained ADMM pruning toolkit"};
  app.require_subcommand(1);

  std::string config, out;
  std::size_t jobs = 1;
  auto* run = app.add_subcommand("run", "Run the experiment grid of a config");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  run->add_option("--jobs,-j", jobs, "Parallel grid cells")->check(CLI::PositiveNumber);
  run->add_option("--out,-o", out, "Output directory (overrides output_dir)");

  double beta = 0, mu = 0, gamma = 0, lam = 0;
  auto* check = app.add_subcommand("check", "Evaluate the convergence conditions for given constants");
  check->add_option("--beta", beta, "Smoothness constant")->required();
  check->add_option("--mu", mu, "Weak convexity constant")->required();
  check->add_option("--gamma", gamma, "Inexactness of the x-update, in [0, 1)")->required();
  check->add_option("--lam", lam, "Penalty")->required();

  auto* oracle = app.add_subcommand("oracle", "Best-subset oracle for a sparse_regression config");
  oracle->add_option("config", config, "Experiment config (JSON)")->required();
  oracle->add_option("--out,-o", out, "Output directory (overrides output_dir)");

  std::string csv;
  bool log_y = false;
  auto* plot = app.add_subcommand("plot", "Plot held-out loss vs sparsity from a summary CSV");
  plot->add_option("csv", csv, "summary.csv")->required();
  plot->add_option("--out,-o", out, "Output SVG")->required();
  plot->add_flag("--log-y", log_y, "Logarithmic loss axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*run) return cmd_run(config, jobs, out);
    if (*check) return cmd_check(beta, mu, gamma, lam);
    if (*oracle) return cmd_oracle(config, out);
    if (*plot) return cmd_plot(csv, out, log_y);
  } catch (const elsa::ConfigError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const elsa::GuardError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
