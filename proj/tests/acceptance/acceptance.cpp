// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "elsa/admm.hpp"
#include "elsa/analysis.hpp"
#include "elsa/baselines.hpp"
#include "elsa/objectives.hpp"
#include "elsa/oracle.hpp"
#include "elsa/projection.hpp"
#include "elsa/quantization.hpp"

using namespace elsa;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& name, const Outcome& o, double secs, double limit) {
  const bool ok = o.pass && secs < limit;
  if (!ok) ++g_failures;
  std::printf("[%s] %2d %-34s %s (%.2fs, limit %gs)\n", ok ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              secs, limit);
  std::fflush(stdout);
}

void run_criterion(int id, const std::string& name, double limit, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, o, seconds_since(t0), limit);
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Exhaustive projection oracle, independent of the library.

// Cost of keeping v exactly on `mask` and zeroing the rest.
double mask_cost(const std::vector<double>& v, const std::vector<double>& w, std::uint32_t mask) {
  double c = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(mask >> i & 1u)) c += w[i] * v[i] * v[i];
  return c;
}

bool mask_allowed(std::uint32_t mask, std::size_t d, std::size_t k, std::size_t n, std::size_t m) {
  if (m == 0) return static_cast<std::size_t>(__builtin_popcount(mask)) <= k;
  for (std::size_t g = 0; g < d; g += m) {
    std::size_t nz = 0;
    for (std::size_t j = g; j < g + m; ++j) nz += mask >> j & 1u;
    if (nz > n) return false;
  }
  return true;
}

// m == 0 selects the plain budget k, otherwise n-of-m groups.
double brute_min(const std::vector<double>& v, const std::vector<double>& w, std::size_t k, std::size_t n,
                 std::size_t m) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t d = v.size();
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask)
    if (mask_allowed(mask, d, k, n, m)) best = std::min(best, mask_cost(v, w, mask));
  return best;
}

// The candidate must keep entries of v unchanged, respect the constraint, and its cost must equal the minimum.
bool attains_min(const std::vector<double>& v, const std::vector<double>& w, const std::vector<double>& c,
                 std::size_t k, std::size_t n, std::size_t m) {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (c[i] == 0.0) continue;
    if (c[i] != v[i]) return false;
    mask |= 1u << i;
  }
  if (!mask_allowed(mask, v.size(), k, n, m)) return false;
  return mask_cost(v, w, mask) == brute_min(v, w, k, n, m);
}

Outcome criterion1() {
  Rng rng(1001);
  int ok = 0;
  const int total = 1000;
  for (int t = 0; t < total; ++t) {
    const bool weighted = t % 2 == 1;
    const bool grouped = t % 4 >= 2;
    std::size_t m = 0, n = 0, d, k = 0;
    if (grouped) {
      m = 1 + rng.below(4);
      n = 1 + rng.below(m);
      d = m * (1 + rng.below(12 / m));
    } else {
      d = 1 + rng.below(12);
      k = rng.below(d + 1);
    }
    const Tensor v = rand_gaussian(rng, {d}, 0.0, 1.0);
    Tensor w(Shape{d}, 1.0);
    if (weighted) {
      w = rand_uniform(rng, {d}, 0.0, 5.0);
      if (t % 40 == 1) w[rng.below(d)] = 0.0;  // exercise zero importance
    }
    Tensor c;
    if (grouped) {
      c = project_nm(v, n, m, weighted ? &w : nullptr);
    } else if (t % 8 == 0 && d >= 2) {
      // global budget across two tensors must equal the flat projection
      const std::size_t split = 1 + rng.below(d - 1);
      std::vector<double> a(v.data().begin(), v.data().begin() + static_cast<std::ptrdiff_t>(split));
      std::vector<double> b(v.data().begin() + static_cast<std::ptrdiff_t>(split), v.data().end());
      const ParamMap p{{"a", Tensor::vector(a)}, {"b", Tensor::vector(b)}};
      const ParamMap out = project_constraint(p, SparsityConstraint{GlobalTopK{k}});
      c = Tensor::vector(flatten(out));
    } else {
      c = weighted ? project_weighted_topk(v, w, k) : project_topk(v, k);
    }
    ok += attains_min(v.data(), w.data(), c.data(), k, n, m);
  }
  return {ok == total, fmt("%d/%d instances attain the enumerated minimum", ok, total)};
}

// ---------------------------------------------------------------------------

Outcome criterion2() {
  Rng rng(1002);
  int bound_ok = 0, exact_ok = 0, none_ok = 0;
  const int per = 1000;
  const auto int8 = QuantFormat::int8();
  for (int t = 0; t < per; ++t) {
    const std::size_t d = 1 + rng.below(256);
    const Tensor z = rand_gaussian(rng, {d}, 0.0, std::pow(10.0, rng.uniform(-4, 4)));
    const auto q = quantize(z, int8);
    const Tensor back = dequantize(q);
    bool good = true;
    for (std::size_t i = 0; i < d; ++i) good &= std::abs(z[i] - back[i]) <= q.scale / 2;
    bound_ok += good;
    none_ok += quant_roundtrip(z, QuantFormat::none()) == z;
  }
  for (const auto& f : {QuantFormat::fp8e4m3(), QuantFormat::bf16()}) {
    for (int t = 0; t < per; ++t) {
      const std::size_t d = 1 + rng.below(256);
      // grid values in code units, scaled by a power of two so that scaling is exact
      const double top = f.scaled ? f.vmax : std::ldexp(1.0, 20);
      std::vector<double> vals(d);
      for (auto& x : vals) x = f.round_to_grid(rng.uniform(-top, top) * std::pow(10.0, -rng.uniform(0, 3)));
      vals[rng.below(d)] = f.scaled ? top : vals[0];
      const int e = static_cast<int>(rng.below(41)) - 20;
      for (auto& x : vals) x = std::ldexp(x, f.scaled ? e : 0);
      const Tensor z = Tensor::vector(vals);
      exact_ok += quant_roundtrip(z, f) == z;
    }
  }
  const bool pass = bound_ok == per && exact_ok == 2 * per && none_ok == per;
  return {pass, fmt("int8 bound %d/%d, float exact %d/%d, none %d/%d", bound_ok, per, exact_ok, 2 * per, none_ok, per)};
}

// ---------------------------------------------------------------------------

Outcome criterion3() {
  Rng rng(1003);
  int agree = 0;
  for (int t = 0; t < 1000; ++t) {
    const ConvergenceParams p{rng.uniform(0, 10), rng.uniform(0, 5), rng.uniform(1e-3, 60), 0.0};
    agree += check_theorem2(p) == check_corollary1(p);
  }
  const double lam = min_feasible_lambda(1.0, 0.0, 0.0);
  const double err = std::abs(lam - std::sqrt(2.0));
  return {agree == 1000 && err <= 1e-5, fmt("agree %d/1000, lambda %.9f (err %.2g)", agree, lam, err)};
}

// ---------------------------------------------------------------------------

struct DescentRuns {
  int monotone = 0;
  int stationary = 0;
  double worst_residual = 0.0;
};

DescentRuns descent_runs() {
  DescentRuns out;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto q = make_random_quadratic(rng, 20, 10.0, true);
    const auto c = quadratic_constants(q);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{5};
    cfg.lam_max = min_feasible_lambda(c.beta, c.mu, 0.0);
    cfg.lam_schedule = ScheduleKind::kConstant;
    cfg.x_update = XUpdate::kExact;
    cfg.order = UpdateOrder::kZXU;
    cfg.interval = 1;
    cfg.total_inner_steps = 2000;
    cfg.seed = seed;
    const auto res = run(q, cfg, q.param_template());
    if (res.aborted) continue;
    out.monotone += descent_audit(res.records, 1e-9).monotone;
    out.stationary += certify_lambda_stationary(q, res.state.z, cfg.constraint, cfg.lam_max, 1e-6);
    out.worst_residual =
        std::max(out.worst_residual, stationarity_residual(q, res.state.z, cfg.constraint, cfg.lam_max));
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion6() {
  int ok = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto inst = sparse_regression_make(rng, 100, 12, 3, 0.01);
    auto& f = *inst.objective;
    const double oracle = best_subset_ls(f.x(), f.y(), 3).loss;
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{3};
    cfg.seed = seed;
    const auto res = run(f, cfg, f.param_template());
    const double ratio = f.eval(res.state.z) / oracle;
    worst = std::max(worst, ratio);
    ok += !res.aborted && ratio <= 1.05;
  }
  return {ok >= 8, fmt("%d/10 seeds within 1.05x of the oracle (worst ratio %.4f)", ok, worst)};
}

// ---------------------------------------------------------------------------
// Shared MLP teacher-student task at 90% global sparsity.

struct MlpSeed {
  double dense = 0, magnitude = 0, iht = 0, elsa = 0, elsaq = 0;
};

struct MlpTask {
  std::vector<MlpSeed> seeds;
  double setup_seconds = 0.0;  // dense pretraining and baselines
  double elsa_seconds = 0.0;
  double elsaq_seconds = 0.0;
};

SolverConfig mlp_solver(std::size_t k, std::uint64_t seed) {
  SolverConfig cfg;
  cfg.constraint.variant = GlobalTopK{k};
  cfg.lam_max = 1.0;
  cfg.lr = 0.01;
  cfg.total_inner_steps = 4096;
  cfg.interval = 32;
  cfg.seed = seed;
  return cfg;
}

MlpTask mlp_task() {
  MlpTask task;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto t0 = Clock::now();
    Rng rng(seed);
    auto f = make_teacher_student(rng, MlpSpec{}, 2000);
    const auto dense = adam_minimize(f, f.initial_params(rng), 4000, 1e-2, seed);
    const auto k = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(total_size(dense))));
    const SparsityConstraint c{GlobalTopK{k}};
    MlpSeed s;
    s.dense = f.eval_heldout(dense);
    s.magnitude = f.eval_heldout(magnitude_prune(dense, c));
    const auto iht = iht_run(f, c, 0.05, 4096, dense, seed);
    s.iht = iht.aborted ? std::numeric_limits<double>::infinity() : f.eval_heldout(iht.x);
    task.setup_seconds += seconds_since(t0);

    t0 = Clock::now();
    SolverConfig cfg = mlp_solver(k, seed);
    const auto e = run(f, cfg, dense);
    s.elsa = e.aborted ? std::numeric_limits<double>::infinity() : f.eval_heldout(e.state.z);
    task.elsa_seconds += seconds_since(t0);

    t0 = Clock::now();
    cfg.quant = QuantConfig{QuantFormat::bf16(), QuantFormat::fp8e4m3()};
    const auto q = run(f, cfg, dense);
    s.elsaq = q.aborted ? std::numeric_limits<double>::infinity() : f.eval_heldout(q.state.z);
    task.elsaq_seconds += seconds_since(t0);
    task.seeds.push_back(s);
  }
  return task;
}

Outcome criterion7(const MlpTask& t) {
  int mag = 0, iht = 0;
  for (const auto& s : t.seeds) {
    mag += s.elsa < s.magnitude;
    iht += s.elsa < s.iht;
  }
  const auto& s0 = t.seeds.front();
  return {mag == 5 && iht >= 4, fmt("beats magnitude %d/5, IHT %d/5 (seed 0: elsa %.4g, mag %.4g, iht %.4g)", mag,
                                    iht, s0.elsa, s0.magnitude, s0.iht)};
}

// ---------------------------------------------------------------------------

Outcome criterion8() {
  int ok = 0;
  std::vector<double> improvement;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto q = make_random_quadratic(rng, 50, 1e3, false);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{5};
    cfg.lam_max = 3000.0;
    cfg.lr = 0.01;
    cfg.total_inner_steps = 2048;
    cfg.interval = 32;
    cfg.seed = seed;
    const auto e = run(q, cfg, q.param_template());
    cfg.projection_mode = ProjectionMode::kFisher;
    const auto f = run(q, cfg, q.param_template());
    const double le = q.eval(e.state.z), lf = q.eval(f.state.z);
    ok += !e.aborted && !f.aborted && lf <= le;
    improvement.push_back(le - lf);
  }
  std::sort(improvement.begin(), improvement.end());
  const double median = 0.5 * (improvement[4] + improvement[5]);
  return {ok >= 8 && median > 0.0, fmt("fisher <= euclidean in %d/10 seeds, median improvement %.4g", ok, median)};
}

// ---------------------------------------------------------------------------

bool identical_streams(Objective& f, SolverConfig cfg, const ParamMap& x0) {
  cfg.quant.reset();
  const auto a = run(f, cfg, x0);
  cfg.quant = QuantConfig{QuantFormat::none(), QuantFormat::none()};
  const auto b = run(f, cfg, x0);
  return !a.aborted && a.records == b.records && a.state.z == b.state.z;
}

Outcome criterion9(const MlpTask& t) {
  int same = 0;
  {
    Rng rng(900);
    auto q = make_random_quadratic(rng, 20, 10.0, true);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{5};
    cfg.total_inner_steps = 1024;
    same += identical_streams(q, cfg, q.param_template());
  }
  {
    Rng rng(901);
    auto inst = sparse_regression_make(rng, 100, 12, 3, 0.01);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{3};
    cfg.projection_mode = ProjectionMode::kFisher;
    cfg.seed = 901;
    same += identical_streams(*inst.objective, cfg, inst.objective->param_template());
  }
  {
    Rng rng(902);
    MlpSpec spec;
    spec.dims = {6, 12, 3};
    auto f = make_teacher_student(rng, spec, 400);
    const auto x0 = f.initial_params(rng);
    same += identical_streams(f, mlp_solver(total_size(x0) / 4, 902), x0);
  }
  int close = 0;
  double worst = 0.0;
  for (const auto& s : t.seeds) {
    const double rel = std::abs(s.elsaq - s.elsa) / s.elsa;
    worst = std::max(worst, rel);
    close += rel <= 0.10;
  }
  return {same == 3 && close >= 4,
          fmt("none-format streams identical %d/3, bf16/fp8 within 10%% in %d/5 (worst %.3f)", same, close, worst)};
}

// ---------------------------------------------------------------------------

Outcome criterion10() {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    MlpSpec spec;
    spec.dims = {16, 16, 16, 16, 16};
    spec.activation = Activation::kIdentity;
    spec.bias = false;
    ParamMap teacher;
    auto f = make_teacher_student(rng, spec, 1000, &teacher);
    PerTensorTopK budgets;
    std::vector<Tensor> weights;
    std::vector<std::size_t> ks;
    for (const auto& [id, w] : teacher) {
      const auto k = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(w.size())));
      budgets.k[id] = k;
      weights.push_back(w);
      ks.push_back(k);
    }
    const Eigen::MatrixXd calib = f.data().train_x.leftCols(128);
    const auto rem = layerwise_rem_prune(weights, calib, ks, Activation::kIdentity);
    ParamMap rem_params;
    std::size_t i = 0;
    for (const auto& [id, w] : teacher) rem_params.emplace(id, rem[i++]);

    SolverConfig cfg;
    cfg.constraint.variant = budgets;
    cfg.lam_max = 10.0;
    cfg.lr = 0.003;
    cfg.total_inner_steps = 4096;
    cfg.seed = seed;
    const auto e = run(f, cfg, teacher);
    ok += !e.aborted && f.eval_heldout(rem_params) > f.eval_heldout(e.state.z);
  }
  return {ok >= 8, fmt("layer-wise reconstruction loses to ELSA in %d/10 seeds", ok)};
}

// ---------------------------------------------------------------------------

Outcome criterion11() {
  struct Case {
    std::string name;
    std::function<std::unique_ptr<Objective>(Rng&)> make;
    double tol;
    double h;  // central differences are exact on quadratics, so only roundoff limits h there
  };
  auto mlp = [](MlpLoss loss, Activation act, bool bias) {
    return [=](Rng& rng) {
      MlpSpec spec;
      spec.dims = {5, 8, 3};
      spec.loss = loss;
      spec.activation = act;
      spec.bias = bias;
      return std::unique_ptr<Objective>(new MlpObjective(make_teacher_student(rng, spec, 200)));
    };
  };
  const std::vector<Case> cases{
      {"quadratic", [](Rng& r) { return std::unique_ptr<Objective>(new QuadraticObjective(make_random_quadratic(r, 20, 10.0, true))); }, 1e-9, 1e-3},
      {"least_squares", [](Rng& r) { return std::unique_ptr<Objective>(new LeastSquaresObjective(*sparse_regression_make(r, 100, 12, 3, 0.1).objective)); }, 1e-9, 1e-3},
      {"logistic", [](Rng& r) { return std::unique_ptr<Objective>(new LogisticObjective(make_logistic(r, 200, 10, 3))); }, 1e-7, 1e-5},
      {"mlp_tanh_mse", mlp(MlpLoss::kMse, Activation::kTanh, true), 1e-5, 1e-5},
      {"mlp_relu_ce", mlp(MlpLoss::kCrossEntropy, Activation::kRelu, true), 1e-5, 1e-5},
      {"mlp_linear_nobias", mlp(MlpLoss::kMse, Activation::kIdentity, false), 1e-5, 1e-5},
  };
  Rng rng(1011);
  std::string detail;
  bool pass = true;
  for (const auto& c : cases) {
    const auto f = c.make(rng);
    double worst = 0.0;
    for (int p = 0; p < 10; ++p) {
      ParamMap x = f->param_template();
      for (auto& [id, t] : x) t = rand_gaussian(rng, t.shape(), 0.0, 1.0);
      worst = std::max(worst, grad_check(*f, x, c.h));
    }
    pass &= worst < c.tol;
    detail += fmt("%s%s %.1e", detail.empty() ? "" : ", ", c.name.c_str(), worst);
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------

int exit_status(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Outcome criterion12() {
#ifndef ELSA_CLI_PATH
  return {false, "command-line tool was not built"};
#else
  const std::string cli = ELSA_CLI_PATH;
  const std::string config = std::string(ELSA_SOURCE_DIR) + "/configs/smoke_quadratic.json";
  const fs::path root = fs::temp_directory_path() / "elsa_acceptance_determinism";
  fs::remove_all(root);
  const int run_a = exit_status(cli + " run " + config + " --out " + (root / "a").string());
  const int run_b = exit_status(cli + " run " + config + " --jobs 4 --out " + (root / "b").string());
  const std::string csv_a = slurp(root / "a" / "summary.csv");
  const bool same = !csv_a.empty() && csv_a == slurp(root / "b" / "summary.csv");

  const int ok = exit_status(cli + " check --beta 1 --mu 0 --gamma 0 --lam 2");
  const int violated = exit_status(cli + " check --beta 2 --mu 0 --gamma 0 --lam 1");
  const int bad_gamma = exit_status(cli + " check --beta 1 --mu 0 --gamma 1.0 --lam 2");
  const bool pass = run_a == 0 && run_b == 0 && same && ok == 0 && violated == 3 && bad_gamma == 2;
  return {pass, fmt("csv identical %s, check exits %d/%d/%d (want 0/3/2)", same ? "yes" : "no", ok, violated,
                    bad_gamma)};
#endif
}

}  // namespace

int main() {
  run_criterion(1, "projection oracle equivalence", 30, criterion1);
  run_criterion(2, "quantization roundtrip bound", 5, criterion2);
  run_criterion(3, "theory predicates", 1, criterion3);

  DescentRuns dr;
  const auto t4 = Clock::now();
  try {
    dr = descent_runs();
  } catch (const std::exception& e) {
    std::printf("descent runs failed: %s\n", e.what());
  }
  const double s4 = seconds_since(t4);
  report(4, "augmented lagrangian descent", {dr.monotone == 20, fmt("%d/20 runs monotone at tol 1e-9", dr.monotone)},
         s4, 10);
  report(5, "lambda-stationarity", {dr.stationary == 20, fmt("%d/20 certified at tol 1e-6 (worst residual %.2g)",
                                                             dr.stationary, dr.worst_residual)},
         s4, 10);

  run_criterion(6, "oracle-competitive regression", 60, criterion6);

  MlpTask task;
  bool task_ok = true;
  try {
    task = mlp_task();
  } catch (const std::exception& e) {
    task_ok = false;
    std::printf("mlp task failed: %s\n", e.what());
  }
  if (task_ok) {
    report(7, "extreme sparsity vs baselines", criterion7(task), task.setup_seconds + task.elsa_seconds, 300);
  } else {
    report(7, "extreme sparsity vs baselines", {false, "task setup threw"}, 0, 300);
  }

  run_criterion(8, "fisher projection ablation", 60, criterion8);

  if (task_ok) {
    const auto t9 = Clock::now();
    const Outcome o9 = criterion9(task);
    report(9, "quantization-off equivalence", o9, seconds_since(t9) + task.elsaq_seconds + task.setup_seconds, 300);
  } else {
    report(9, "quantization-off equivalence", {false, "task setup threw"}, 0, 300);
  }

  run_criterion(10, "compounding layer-wise error", 120, criterion10);
  run_criterion(11, "gradient correctness", 10, criterion11);
  run_criterion(12, "determinism and cli contract", 10, criterion12);

  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}
