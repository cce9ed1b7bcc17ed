#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "elsa/admm.hpp"
#include "elsa/analysis.hpp"
#include "elsa/objectives.hpp"
#include "elsa/projection.hpp"

namespace elsa {

/// Malformed or out-of-range experiment input. The message names the line or field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An instance too large for exhaustive enumeration.
class GuardError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ObjectiveKind { kQuadratic, kSparseRegression, kLogistic, kMlp };
enum class Method { kElsa, kElsaQ, kMagnitude, kIht, kRem };

std::string to_string(ObjectiveKind k);
ObjectiveKind objective_kind_from_string(const std::string& s);
std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Objective family and its parameters. Only the fields of `kind` are read or written.
struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::kQuadratic;
  // quadratic
  std::size_t dim = 20;
  double cond = 10.0;
  bool rotate = true;
  // sparse_regression, logistic
  std::size_t n = 100;
  std::size_t d = 12;
  std::size_t k_true = 3;
  double noise = 0.01;  // sparse_regression only
  // mlp
  std::vector<std::size_t> dims{8, 32, 32, 4};
  Activation activation = Activation::kTanh;
  MlpLoss loss = MlpLoss::kMse;
  bool bias = true;
  std::size_t n_samples = 2000;
};

/// Where every method starts: the objective's initial point (or, for mlp, the
/// teacher network), optionally followed by dense Adam pretraining.
struct DenseSpec {
  std::string start = "init";  // "init" | "teacher"
  std::int64_t pretrain_steps = 0;
  double pretrain_lr = 1e-2;
};

/// Shape of the feasible set; the budget comes from the sparsity grid.
struct ConstraintSpec {
  std::string kind = "global";  // global | per_tensor | nm | non_uniform
  std::size_t n = 2;            // nm
  std::size_t m = 4;            // nm
  std::map<std::string, double> layer_ratio;  // non_uniform: tensor sparsity = min(1, s * ratio)
  TieBreak tie_break = TieBreak::kLowestIndex;
};

struct IhtSpec {
  double step_size = 0.05;
  std::int64_t steps = 0;  // 0: same as solver.total_inner_steps
};

struct RemSpec {
  std::size_t calib_samples = 128;
};

struct ExperimentConfig {
  ObjectiveSpec objective;
  DenseSpec dense;
  std::vector<Method> methods{Method::kElsa};
  SolverConfig solver;  // constraint and seed are filled per grid cell
  QuantConfig quant;    // used by elsaq
  ConstraintSpec constraint;
  IhtSpec iht;
  RemSpec rem;
  std::vector<double> sparsities;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Strict JSON parsing: unknown fields, wrong types and out-of-range values
/// raise ConfigError with a line/column or field path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical JSON text with every field spelled out.
std::string serialize_config(const ExperimentConfig& cfg);

/// Value of ELSA_SEED when set; throws ConfigError when it is not an unsigned integer.
std::optional<std::uint64_t> env_seed_override();

/// Nonzero budget for a tensor of `size` entries at sparsity fraction s: round((1 - s) * size).
std::size_t budget_for(double sparsity, std::size_t size);

/// Parameter ids and shapes of the objective, without building any data.
ParamMap param_layout(const ObjectiveSpec& spec);

/// Constraint for one grid sparsity over `layout`.
SparsityConstraint make_constraint(const ConstraintSpec& spec, double sparsity, const ParamMap& layout);

struct SummaryRow {
  Method method = Method::kElsa;
  double sparsity = 0.0;
  std::uint64_t seed = 0;
  double heldout_loss = 0.0;
  double train_loss = 0.0;
  double achieved_sparsity = 0.0;
  double stationarity_residual = 0.0;
  bool stationary = false;
  std::optional<bool> corollary1;
  std::optional<bool> theorem2;
  std::optional<bool> descent_monotone;
  bool aborted = false;
  std::string error;
  std::string jsonl;  // path relative to the output directory
  double wall_seconds = 0.0;
  AnalysisSummary analysis;
};

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<std::string> out_dir;  // overrides cfg.output_dir
};

struct ExperimentResult {
  std::vector<SummaryRow> rows;  // grid order: seed, sparsity, method
  std::string out_dir;
  bool any_failed = false;
};

/// Runs the whole grid, writing runs/*.jsonl, summary.csv, report.json and
/// figure.svg under the output directory. Failed cells are reported in their
/// rows; files for the others are still written.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Summary CSV text. Contains no timing, so reruns are byte-identical.
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Held-out loss vs sparsity per method (mean over seeds) as an SVG line chart,
/// computed from summary CSV text alone.
std::string plot_summary_csv(const std::string& csv_text, bool log_y);

struct OracleEntry {
  std::uint64_t seed = 0;
  double sparsity = 0.0;
  std::size_t k = 0;
  std::vector<std::size_t> support;
  double loss = 0.0;
};

/// Best-subset oracle for every (seed, sparsity) of a sparse_regression config.
/// Throws ConfigError for other objectives and GuardError beyond the enumeration limit.
std::vector<OracleEntry> run_oracle(const ExperimentConfig& cfg);
std::string oracle_json(const std::vector<OracleEntry>& entries);

struct CheckReport {
  bool corollary1 = false;
  bool theorem2 = false;
  std::optional<double> lambda_min_feasible;  // empty when no lam up to the search limit works
  bool satisfied() const { return corollary1 && theorem2; }
};

/// Evaluates both convergence predicates. Throws std::invalid_argument on bad constants.
CheckReport check_conditions(const ConvergenceParams& p);
std::string format_check_report(const ConvergenceParams& p, const CheckReport& r);

}  // namespace elsa
