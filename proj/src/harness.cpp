#include "elsa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include <nlohmann/json.hpp>

#include "elsa/baselines.hpp"
#include "elsa/format.hpp"
#include "elsa/oracle.hpp"
#include "elsa/svg.hpp"

namespace elsa {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::kQuadratic: return "quadratic";
    case ObjectiveKind::kSparseRegression: return "sparse_regression";
    case ObjectiveKind::kLogistic: return "logistic";
    case ObjectiveKind::kMlp: return "mlp";
  }
  return "?";
}

ObjectiveKind objective_kind_from_string(const std::string& s) {
  if (s == "quadratic") return ObjectiveKind::kQuadratic;
  if (s == "sparse_regression") return ObjectiveKind::kSparseRegression;
  if (s == "logistic") return ObjectiveKind::kLogistic;
  if (s == "mlp") return ObjectiveKind::kMlp;
  throw std::invalid_argument("unknown objective kind '" + s + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kElsa: return "elsa";
    case Method::kElsaQ: return "elsaq";
    case Method::kMagnitude: return "magnitude";
    case Method::kIht: return "iht";
    case Method::kRem: return "rem";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "elsa") return Method::kElsa;
  if (s == "elsaq") return Method::kElsaQ;
  if (s == "magnitude") return Method::kMagnitude;
  if (s == "iht") return Method::kIht;
  if (s == "rem") return Method::kRem;
  throw std::invalid_argument("unknown method '" + s + "'");
}

// --- config parsing --------------------------------------------------------

namespace {

// Strict view of one JSON object: every key must be consumed before finish().
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(describe() + ": expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) fail(key, "missing required field");
    return *v;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }

  template <class I>
  void count(const std::string& key, I& out) {
    if (const json* v = get(key)) out = as_count<I>(*v, key);
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }

  template <class E, class F>
  void enumerated(const std::string& key, E& out, F&& from) {
    if (const json* v = get(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      try {
        out = from(v->get<std::string>());
      } catch (const std::invalid_argument& e) {
        fail(key, e.what());
      }
    }
  }

  template <class I>
  I as_count(const json& v, const std::string& key) {
    if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    return static_cast<I>(v.get<std::uint64_t>());
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError("unknown field '" + path(item.key()) + "'");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError("field '" + path(key) + "': " + msg);
  }

 private:
  std::string describe() const { return path_.empty() ? "config" : "field '" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_objective(const json& j, ObjectiveSpec& o) {
  Fields f(j, "objective");
  f.enumerated("kind", o.kind, objective_kind_from_string);
  if (!f.get("kind")) f.fail("kind", "missing required field");
  switch (o.kind) {
    case ObjectiveKind::kQuadratic:
      f.count("dim", o.dim);
      f.number("cond", o.cond);
      f.boolean("rotate", o.rotate);
      break;
    case ObjectiveKind::kSparseRegression:
      f.count("n", o.n);
      f.count("d", o.d);
      f.count("k_true", o.k_true);
      f.number("noise", o.noise);
      break;
    case ObjectiveKind::kLogistic:
      f.count("n", o.n);
      f.count("d", o.d);
      f.count("k_true", o.k_true);
      break;
    case ObjectiveKind::kMlp:
      if (const json* v = f.get("dims")) {
        if (!v->is_array()) f.fail("dims", "expected an array of layer widths");
        o.dims.clear();
        for (const auto& e : *v) o.dims.push_back(f.as_count<std::size_t>(e, "dims"));
      }
      f.enumerated("activation", o.activation, activation_from_string);
      f.enumerated("loss", o.loss, mlp_loss_from_string);
      f.boolean("bias", o.bias);
      f.count("n_samples", o.n_samples);
      break;
  }
  f.finish();
}

void parse_solver(const json& j, SolverConfig& s, QuantConfig& q) {
  Fields f(j, "solver");
  f.number("lam_max", s.lam_max);
  f.enumerated("lam_schedule", s.lam_schedule, schedule_kind_from_string);
  f.number("lr", s.lr);
  f.enumerated("lr_schedule", s.lr_schedule, schedule_kind_from_string);
  f.number("lr_end", s.lr_end);
  f.count("interval", s.interval);
  f.count("total_inner_steps", s.total_inner_steps);
  f.count("batch_size", s.batch_size);
  f.enumerated("projection_mode", s.projection_mode, projection_mode_from_string);
  f.enumerated("x_update", s.x_update, x_update_from_string);
  f.enumerated("order", s.order, update_order_from_string);
  if (const json* v = f.get("quant")) {
    Fields qf(*v, f.path("quant"));
    qf.enumerated("u_format", q.u_format, QuantFormat::from_name);
    qf.enumerated("z_format", q.z_format, QuantFormat::from_name);
    qf.finish();
  }
  if (const json* v = f.get("adam")) {
    Fields af(*v, f.path("adam"));
    af.number("beta1", s.adam.beta1);
    af.number("beta2", s.adam.beta2);
    af.number("eps", s.adam.eps);
    af.finish();
  }
  f.finish();
}

void parse_constraint(const json& j, ConstraintSpec& c) {
  Fields f(j, "constraint");
  f.string("kind", c.kind);
  if (c.kind == "nm") {
    f.count("n", c.n);
    f.count("m", c.m);
  } else if (c.kind == "non_uniform") {
    if (const json* v = f.get("layer_ratio")) {
      if (!v->is_object()) f.fail("layer_ratio", "expected an object of tensor id -> ratio");
      c.layer_ratio.clear();
      for (const auto& item : v->items()) {
        if (!item.value().is_number()) f.fail("layer_ratio." + item.key(), "expected a number");
        c.layer_ratio[item.key()] = item.value().get<double>();
      }
    }
  } else if (c.kind != "global" && c.kind != "per_tensor") {
    f.fail("kind", "expected global, per_tensor, nm or non_uniform");
  }
  f.enumerated("tie_break", c.tie_break, tie_break_from_string);
  f.finish();
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // The reported byte is one past the offending character.
    auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": invalid JSON (" +
                      e.what() + ")");
  }

  ExperimentConfig cfg;
  Fields f(j, "");
  parse_objective(f.require("objective"), cfg.objective);
  if (const json* v = f.get("dense")) {
    Fields df(*v, "dense");
    df.string("start", cfg.dense.start);
    df.count("pretrain_steps", cfg.dense.pretrain_steps);
    df.number("pretrain_lr", cfg.dense.pretrain_lr);
    df.finish();
  }
  if (const json* v = f.get("methods")) {
    if (!v->is_array()) f.fail("methods", "expected an array of method names");
    cfg.methods.clear();
    for (const auto& e : *v) {
      if (!e.is_string()) f.fail("methods", "expected method names as strings");
      try {
        cfg.methods.push_back(method_from_string(e.get<std::string>()));
      } catch (const std::invalid_argument& ex) {
        f.fail("methods", ex.what());
      }
    }
  }
  if (const json* v = f.get("solver")) parse_solver(*v, cfg.solver, cfg.quant);
  if (const json* v = f.get("constraint")) parse_constraint(*v, cfg.constraint);
  if (const json* v = f.get("iht")) {
    Fields hf(*v, "iht");
    hf.number("step_size", cfg.iht.step_size);
    hf.count("steps", cfg.iht.steps);
    hf.finish();
  }
  if (const json* v = f.get("rem")) {
    Fields rf(*v, "rem");
    rf.count("calib_samples", cfg.rem.calib_samples);
    rf.finish();
  }
  {
    const json& v = f.require("sparsities");
    if (!v.is_array()) f.fail("sparsities", "expected an array of fractions");
    for (const auto& e : v) {
      if (!e.is_number()) f.fail("sparsities", "expected numbers");
      cfg.sparsities.push_back(e.get<double>());
    }
  }
  f.count("repeats", cfg.repeats);
  f.count("seed", cfg.seed);
  f.string("output_dir", cfg.output_dir);
  f.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  const auto& o = cfg.objective;
  json obj{{"kind", to_string(o.kind)}};
  switch (o.kind) {
    case ObjectiveKind::kQuadratic:
      obj["dim"] = o.dim;
      obj["cond"] = o.cond;
      obj["rotate"] = o.rotate;
      break;
    case ObjectiveKind::kSparseRegression:
      obj["n"] = o.n;
      obj["d"] = o.d;
      obj["k_true"] = o.k_true;
      obj["noise"] = o.noise;
      break;
    case ObjectiveKind::kLogistic:
      obj["n"] = o.n;
      obj["d"] = o.d;
      obj["k_true"] = o.k_true;
      break;
    case ObjectiveKind::kMlp:
      obj["dims"] = o.dims;
      obj["activation"] = to_string(o.activation);
      obj["loss"] = to_string(o.loss);
      obj["bias"] = o.bias;
      obj["n_samples"] = o.n_samples;
      break;
  }
  j["objective"] = obj;
  j["dense"] = {{"start", cfg.dense.start},
                {"pretrain_steps", cfg.dense.pretrain_steps},
                {"pretrain_lr", cfg.dense.pretrain_lr}};
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  const auto& s = cfg.solver;
  j["solver"] = {{"lam_max", s.lam_max},
                 {"lam_schedule", to_string(s.lam_schedule)},
                 {"lr", s.lr},
                 {"lr_schedule", to_string(s.lr_schedule)},
                 {"lr_end", s.lr_end},
                 {"interval", s.interval},
                 {"total_inner_steps", s.total_inner_steps},
                 {"batch_size", s.batch_size},
                 {"projection_mode", to_string(s.projection_mode)},
                 {"x_update", to_string(s.x_update)},
                 {"order", to_string(s.order)},
                 {"quant", {{"u_format", cfg.quant.u_format.name}, {"z_format", cfg.quant.z_format.name}}},
                 {"adam", {{"beta1", s.adam.beta1}, {"beta2", s.adam.beta2}, {"eps", s.adam.eps}}}};
  json c{{"kind", cfg.constraint.kind}};
  if (cfg.constraint.kind == "nm") {
    c["n"] = cfg.constraint.n;
    c["m"] = cfg.constraint.m;
  } else if (cfg.constraint.kind == "non_uniform") {
    json r = json::object();
    for (const auto& [id, v] : cfg.constraint.layer_ratio) r[id] = v;
    c["layer_ratio"] = r;
  }
  c["tie_break"] = to_string(cfg.constraint.tie_break);
  j["constraint"] = c;
  j["iht"] = {{"step_size", cfg.iht.step_size}, {"steps", cfg.iht.steps}};
  j["rem"] = {{"calib_samples", cfg.rem.calib_samples}};
  j["sparsities"] = cfg.sparsities;
  j["repeats"] = cfg.repeats;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  return j.dump(2) + "\n";
}

std::optional<std::uint64_t> env_seed_override() {
  const char* v = std::getenv("ELSA_SEED");
  if (!v) return std::nullopt;
  const std::string s(v);
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("ELSA_SEED must be a non-negative integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::out_of_range&) {
    throw ConfigError("ELSA_SEED is out of range");
  }
}

// --- layout and constraints ------------------------------------------------

std::size_t budget_for(double sparsity, std::size_t size) {
  const double keep = (1.0 - sparsity) * static_cast<double>(size);
  return static_cast<std::size_t>(std::llround(std::clamp(keep, 0.0, static_cast<double>(size))));
}

ParamMap param_layout(const ObjectiveSpec& spec) {
  ParamMap p;
  switch (spec.kind) {
    case ObjectiveKind::kQuadratic: p.emplace("x", Tensor(Shape{spec.dim})); break;
    case ObjectiveKind::kSparseRegression:
    case ObjectiveKind::kLogistic: p.emplace("w", Tensor(Shape{spec.d})); break;
    case ObjectiveKind::kMlp:
      for (std::size_t l = 0; l + 1 < spec.dims.size(); ++l) {
        const std::string base = "layer" + std::to_string(l);
        p.emplace(base + ".weight", Tensor(Shape{spec.dims[l + 1], spec.dims[l]}));
        if (spec.bias) p.emplace(base + ".bias", Tensor(Shape{spec.dims[l + 1]}));
      }
      break;
  }
  return p;
}

SparsityConstraint make_constraint(const ConstraintSpec& spec, double sparsity, const ParamMap& layout) {
  SparsityConstraint c;
  c.tie_break = spec.tie_break;
  if (spec.kind == "global") {
    c.variant = GlobalTopK{budget_for(sparsity, total_size(layout))};
  } else if (spec.kind == "per_tensor") {
    PerTensorTopK p;
    for (const auto& [id, t] : layout) p.k[id] = budget_for(sparsity, t.size());
    c.variant = p;
  } else if (spec.kind == "nm") {
    c.variant = NM{spec.n, spec.m};
  } else if (spec.kind == "non_uniform") {
    NonUniform nu;
    for (const auto& [id, ratio] : spec.layer_ratio) {
      auto it = layout.find(id);
      if (it == layout.end()) throw std::invalid_argument("layer_ratio names unknown tensor '" + id + "'");
      nu.k[id] = budget_for(std::min(1.0, sparsity * ratio), it->second.size());
    }
    c.variant = nu;
  } else {
    throw std::invalid_argument("unknown constraint kind '" + spec.kind + "'");
  }
  return c;
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& msg) { throw ConfigError("field '" + field + "': " + msg); };
  const auto& o = objective;
  switch (o.kind) {
    case ObjectiveKind::kQuadratic:
      if (o.dim < 1) bad("objective.dim", "must be >= 1");
      if (!(o.cond >= 1.0) || !std::isfinite(o.cond)) bad("objective.cond", "must be a finite number >= 1");
      break;
    case ObjectiveKind::kSparseRegression:
    case ObjectiveKind::kLogistic:
      if (o.n < 1) bad("objective.n", "must be >= 1");
      if (o.d < 1) bad("objective.d", "must be >= 1");
      if (o.k_true > o.d) bad("objective.k_true", "must not exceed d");
      if (!(o.noise >= 0.0) || !std::isfinite(o.noise)) bad("objective.noise", "must be finite and non-negative");
      break;
    case ObjectiveKind::kMlp:
      if (o.dims.size() < 2) bad("objective.dims", "needs at least input and output widths");
      for (std::size_t w : o.dims)
        if (w < 1) bad("objective.dims", "widths must be >= 1");
      if (o.loss == MlpLoss::kCrossEntropy && o.dims.back() < 2) bad("objective.dims", "cross_entropy needs >= 2 classes");
      if (o.n_samples < 5) bad("objective.n_samples", "must be >= 5 for the 80/20 split");
      break;
  }

  if (dense.start != "init" && dense.start != "teacher") bad("dense.start", "expected init or teacher");
  if (dense.start == "teacher" && o.kind != ObjectiveKind::kMlp) bad("dense.start", "teacher requires an mlp objective");
  if (dense.pretrain_steps < 0) bad("dense.pretrain_steps", "must be >= 0");
  if (!(dense.pretrain_lr > 0.0) || !std::isfinite(dense.pretrain_lr)) bad("dense.pretrain_lr", "must be positive");

  if (methods.empty()) bad("methods", "must list at least one method");
  std::set<Method> uniq(methods.begin(), methods.end());
  if (uniq.size() != methods.size()) bad("methods", "duplicate method");

  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    bad("solver", e.what());
  }
  if (solver.batch_size < 1) bad("solver.batch_size", "must be >= 1");
  if (!(solver.adam.beta1 >= 0.0 && solver.adam.beta1 < 1.0)) bad("solver.adam.beta1", "must be in [0, 1)");
  if (!(solver.adam.beta2 >= 0.0 && solver.adam.beta2 < 1.0)) bad("solver.adam.beta2", "must be in [0, 1)");
  if (!(solver.adam.eps > 0.0)) bad("solver.adam.eps", "must be positive");
  const bool has_prox = o.kind == ObjectiveKind::kQuadratic || o.kind == ObjectiveKind::kSparseRegression;
  if (solver.x_update == XUpdate::kExact && !has_prox) {
    bad("solver.x_update", "exact needs a quadratic or sparse_regression objective");
  }

  if (!(iht.step_size > 0.0) || !std::isfinite(iht.step_size)) bad("iht.step_size", "must be positive");
  if (iht.steps < 0) bad("iht.steps", "must be >= 0");
  if (rem.calib_samples < 1) bad("rem.calib_samples", "must be >= 1");
  if (uniq.contains(Method::kRem) && (o.kind != ObjectiveKind::kMlp || o.bias)) {
    bad("methods", "rem needs an mlp objective without bias");
  }

  if (sparsities.empty()) bad("sparsities", "must not be empty");
  for (double s : sparsities)
    if (!(s >= 0.0 && s < 1.0)) bad("sparsities", "fractions must lie in [0, 1)");
  if (repeats < 1) bad("repeats", "must be >= 1");
  if (output_dir.empty()) bad("output_dir", "must not be empty");

  const ParamMap layout = param_layout(o);
  if (constraint.kind == "nm") {
    const double implied = 1.0 - static_cast<double>(constraint.n) / static_cast<double>(constraint.m);
    for (double s : sparsities)
      if (constraint.m > 0 && std::abs(s - implied) > 1e-12) {
        bad("sparsities", "an nm constraint fixes the sparsity at 1 - n/m = " + format_real(implied));
      }
  }
  if (constraint.kind == "non_uniform") {
    for (const auto& [id, r] : constraint.layer_ratio)
      if (!(r >= 0.0) || !std::isfinite(r)) bad("constraint.layer_ratio." + id, "must be finite and non-negative");
  }
  for (double s : sparsities) {
    try {
      make_constraint(constraint, s, layout).validate(layout);
    } catch (const std::invalid_argument& e) {
      bad("constraint", e.what());
    }
  }
}

// --- running ---------------------------------------------------------------

namespace {

using AnyObjective = std::variant<QuadraticObjective, LeastSquaresObjective, LogisticObjective, MlpObjective>;

Objective& as_objective(AnyObjective& v) {
  return std::visit([](auto& o) -> Objective& { return o; }, v);
}

struct Instance {
  AnyObjective obj;
  ParamMap dense;
  std::optional<QuadraticConstants> constants;
};

Instance build_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const auto& o = cfg.objective;
  ParamMap teacher;
  auto make = [&]() -> AnyObjective {
    switch (o.kind) {
      case ObjectiveKind::kQuadratic: return make_random_quadratic(rng, o.dim, o.cond, o.rotate);
      case ObjectiveKind::kSparseRegression: return *sparse_regression_make(rng, o.n, o.d, o.k_true, o.noise).objective;
      case ObjectiveKind::kLogistic: return make_logistic(rng, o.n, o.d, o.k_true);
      case ObjectiveKind::kMlp: {
        MlpSpec spec;
        spec.dims = o.dims;
        spec.activation = o.activation;
        spec.loss = o.loss;
        spec.bias = o.bias;
        spec.batch_size = cfg.solver.batch_size;
        return make_teacher_student(rng, spec, o.n_samples, &teacher);
      }
    }
    throw std::logic_error("unhandled objective kind");
  };
  Instance inst{make(), {}, std::nullopt};
  if (auto* q = std::get_if<QuadraticObjective>(&inst.obj)) inst.constants = quadratic_constants(*q);
  Objective& obj = as_objective(inst.obj);
  inst.dense = cfg.dense.start == "teacher" ? teacher : obj.initial_params(rng);
  if (cfg.dense.pretrain_steps > 0) {
    inst.dense = adam_minimize(obj, inst.dense, cfg.dense.pretrain_steps, cfg.dense.pretrain_lr, seed);
  }
  return inst;
}

double achieved_sparsity(const ParamMap& z) {
  const auto d = total_size(z);
  return d == 0 ? 0.0 : 1.0 - static_cast<double>(norms(z).l0) / static_cast<double>(d);
}

RoundRecord static_record(const Objective& obj, const ParamMap& z) {
  RoundRecord r;
  r.loss_x = r.loss_z = r.aug_lagrangian = obj.eval_reference(z);
  r.sparsity_achieved = achieved_sparsity(z);
  return r;
}

std::string sparsity_tag(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", s);
  return buf;
}

std::vector<Tensor> chain_weights(const ParamMap& p, std::size_t layers) {
  std::vector<Tensor> ws;
  for (std::size_t l = 0; l < layers; ++l) ws.push_back(p.at("layer" + std::to_string(l) + ".weight"));
  return ws;
}

SummaryRow run_cell(const ExperimentConfig& cfg, const Instance& inst, Method method, double sparsity,
                    std::uint64_t seed, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  SummaryRow row;
  row.method = method;
  row.sparsity = sparsity;
  row.seed = seed;
  row.jsonl = "runs/" + to_string(method) + "_s" + sparsity_tag(sparsity) + "_seed" + std::to_string(seed) + ".jsonl";

  AnyObjective objv = inst.obj;
  Objective& obj = as_objective(objv);
  std::vector<RoundRecord> records;
  ParamMap z;
  double lam_stat = cfg.solver.lam_max;

  try {
    const SparsityConstraint c = make_constraint(cfg.constraint, sparsity, inst.dense);
    switch (method) {
      case Method::kElsa:
      case Method::kElsaQ: {
        SolverConfig sc = cfg.solver;
        sc.constraint = c;
        sc.seed = seed;
        if (method == Method::kElsaQ) sc.quant = cfg.quant;
        double gamma_max = 0.0;
        double xnorm_max = 0.0;
        const auto* quad = std::get_if<QuadraticObjective>(&objv);
        RoundObserver observer = [&](const RoundView& v) {
          xnorm_max = std::max(xnorm_max, norms(v.state.x).l2);
          if (!quad) return;
          // x-update target given the z and u the round actually used
          const ParamMap& z_used = sc.order == UpdateOrder::kZXU ? v.state.z : v.z_prev;
          const Tensor xs = quad->xstar_prox(z_used.at("x"), v.u_prev.at("x"), v.record.lam);
          gamma_max = std::max(gamma_max, measure_gamma(QuadraticObjective::wrap(xs), v.state.x, v.state.z, v.x_prev));
        };
        RunResult r = run(obj, sc, inst.dense, observer);
        records = std::move(r.records);
        z = r.state.z;
        lam_stat = r.state.lam_current > 0.0 ? r.state.lam_current : sc.lam_max;
        if (r.aborted) {
          row.aborted = true;
          row.error = r.error;
        }
        row.descent_monotone = descent_audit(records, 1e-9).monotone;
        row.analysis.descent_monotone = *row.descent_monotone;
        row.analysis.max_iterate_norm = xnorm_max;
        if (inst.constants) {
          row.analysis.empirical_gamma_max = gamma_max;
          ConvergenceParams p{inst.constants->beta, inst.constants->mu, sc.lam_max, 0.0};
          row.corollary1 = check_corollary1(p);
          if (gamma_max < 1.0) {
            p.gamma = gamma_max;
            row.theorem2 = check_theorem2(p);
            try {
              row.analysis.lambda_min_feasible = min_feasible_lambda(p.beta, p.mu, p.gamma);
            } catch (const std::invalid_argument&) {
            }
          } else {
            row.theorem2 = false;
          }
          row.analysis.corollary1 = row.corollary1;
          row.analysis.theorem2 = row.theorem2;
        }
        break;
      }
      case Method::kMagnitude:
        z = magnitude_prune(inst.dense, c);
        records.push_back(static_record(obj, z));
        break;
      case Method::kIht: {
        const std::int64_t steps = cfg.iht.steps > 0 ? cfg.iht.steps : cfg.solver.total_inner_steps;
        IhtResult r = iht_run(obj, c, cfg.iht.step_size, steps, inst.dense, seed, cfg.solver.interval);
        records = std::move(r.records);
        z = std::move(r.x);
        lam_stat = 1.0 / cfg.iht.step_size;
        if (r.aborted) {
          row.aborted = true;
          row.error = r.error;
        }
        break;
      }
      case Method::kRem: {
        const auto& mlp = std::get<MlpObjective>(objv);
        const std::size_t layers = cfg.objective.dims.size() - 1;
        std::vector<std::size_t> ks;
        for (std::size_t l = 0; l < layers; ++l) {
          ks.push_back(budget_for(sparsity, cfg.objective.dims[l] * cfg.objective.dims[l + 1]));
        }
        const auto& train = mlp.data().train_x;
        const Eigen::Index ncal = std::min<Eigen::Index>(static_cast<Eigen::Index>(cfg.rem.calib_samples), train.cols());
        const auto pruned = layerwise_rem_prune(chain_weights(inst.dense, layers), train.leftCols(ncal), ks,
                                                cfg.objective.activation);
        z = inst.dense;
        for (std::size_t l = 0; l < layers; ++l) z.at("layer" + std::to_string(l) + ".weight") = pruned[l];
        records.push_back(static_record(obj, z));
        // The per-layer budgets define the feasible set here, whatever the configured constraint.
        PerTensorTopK per;
        for (std::size_t l = 0; l < layers; ++l) per.k["layer" + std::to_string(l) + ".weight"] = ks[l];
        const SparsityConstraint rc{per, cfg.constraint.tie_break};
        row.stationarity_residual = stationarity_residual(obj, z, rc, lam_stat);
        row.stationary = certify_lambda_stationary(obj, z, rc, lam_stat);
        break;
      }
    }
    if (!z.empty()) {
      row.heldout_loss = obj.eval_heldout(z);
      row.train_loss = obj.eval_train(z);
      row.achieved_sparsity = achieved_sparsity(z);
      if (method != Method::kRem) {
        row.stationarity_residual = stationarity_residual(obj, z, c, lam_stat);
        row.stationary = certify_lambda_stationary(obj, z, c, lam_stat);
      }
      row.analysis.stationary = row.stationary;
    }
  } catch (const std::exception& e) {
    row.aborted = true;
    row.error = e.what();
  }
  if (z.empty()) {
    row.heldout_loss = row.train_loss = std::nan("");
    row.stationarity_residual = std::nan("");
  }
  write_jsonl((out_dir / row.jsonl).string(), records);
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) f(i);
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
}

std::string csv_real(double v) {
  const std::string s = format_real(v);
  return s == "null" ? "nan" : s;
}

std::string csv_flag(const std::optional<bool>& b) { return b ? (*b ? "true" : "false") : "na"; }

json opt_json(const std::optional<bool>& b) { return b ? json(*b) : json(nullptr); }
json opt_json(const std::optional<double>& d) { return d && std::isfinite(*d) ? json(*d) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "method,sparsity,seed,heldout_loss,train_loss,achieved_sparsity,stationarity_residual,stationary,"
        "corollary1,theorem2,descent_monotone,aborted,jsonl\n";
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << csv_real(r.sparsity) << ',' << r.seed << ',' << csv_real(r.heldout_loss) << ','
       << csv_real(r.train_loss) << ',' << csv_real(r.achieved_sparsity) << ',' << csv_real(r.stationarity_residual)
       << ',' << (r.stationary ? "true" : "false") << ',' << csv_flag(r.corollary1) << ',' << csv_flag(r.theorem2)
       << ',' << csv_flag(r.descent_monotone) << ',' << (r.aborted ? "true" : "false") << ',' << r.jsonl << '\n';
  }
  return os.str();
}

std::string plot_summary_csv(const std::string& csv_text, bool log_y) {
  std::istringstream is(csv_text);
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("summary CSV is empty");
  const auto header = split_csv_line(line);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("summary CSV lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cm = col("method"), cs = col("sparsity"), cl = col("heldout_loss");

  // method -> sparsity -> (sum, count); methods keep first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::map<double, std::pair<double, int>>> acc;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw std::invalid_argument("summary CSV line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(header.size()) + " fields");
    }
    double s = 0.0, loss = 0.0;
    try {
      s = std::stod(f[cs]);
      loss = std::stod(f[cl]);
    } catch (const std::exception&) {
      throw std::invalid_argument("summary CSV line " + std::to_string(lineno) + ": malformed number");
    }
    if (!acc.contains(f[cm])) order.push_back(f[cm]);
    auto& cell = acc[f[cm]][s];
    if (std::isfinite(loss)) {
      cell.first += loss;
      ++cell.second;
    }
  }

  std::vector<Series> series;
  for (const auto& m : order) {
    Series sr{m, {}};
    for (const auto& [s, sum_n] : acc[m])
      if (sum_n.second > 0) sr.points.emplace_back(s, sum_n.first / sum_n.second);
    series.push_back(std::move(sr));
  }
  PlotOptions po;
  po.title = "Held-out loss vs sparsity";
  po.x_label = "sparsity";
  po.y_label = "held-out loss";
  po.log_y = log_y;
  return render_line_chart(series, po);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.out_dir = opts.out_dir.value_or(cfg.output_dir);
  const fs::path out(res.out_dir);
  fs::create_directories(out / "runs");

  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < cfg.repeats; ++r) seeds.push_back(cfg.seed + r);

  std::vector<std::optional<Instance>> instances(seeds.size());
  std::vector<std::string> instance_errors(seeds.size());
  parallel_for(seeds.size(), opts.jobs, [&](std::size_t i) {
    try {
      instances[i].emplace(build_instance(cfg, seeds[i]));
    } catch (const std::exception& e) {
      instance_errors[i] = e.what();
    }
  });

  struct Cell {
    std::size_t seed_idx;
    double sparsity;
    Method method;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (double s : cfg.sparsities)
      for (Method m : cfg.methods) cells.push_back({i, s, m});

  res.rows.resize(cells.size());
  parallel_for(cells.size(), opts.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    if (!instances[c.seed_idx]) {
      SummaryRow& row = res.rows[i];
      row.method = c.method;
      row.sparsity = c.sparsity;
      row.seed = seeds[c.seed_idx];
      row.aborted = true;
      row.error = "building the objective failed: " + instance_errors[c.seed_idx];
      row.heldout_loss = row.train_loss = row.stationarity_residual = std::nan("");
      return;
    }
    res.rows[i] = run_cell(cfg, *instances[c.seed_idx], c.method, c.sparsity, seeds[c.seed_idx], out);
  });

  res.any_failed = std::any_of(res.rows.begin(), res.rows.end(), [](const SummaryRow& r) { return r.aborted; });
  const std::string csv = summary_csv(res.rows);
  write_text(out / "summary.csv", csv);

  bool log_y = true;
  double lo = INFINITY, hi = 0.0;
  for (const auto& r : res.rows) {
    if (!std::isfinite(r.heldout_loss)) continue;
    if (r.heldout_loss <= 0.0) log_y = false;
    lo = std::min(lo, r.heldout_loss);
    hi = std::max(hi, r.heldout_loss);
  }
  log_y = log_y && lo > 0.0 && hi / lo >= 100.0;
  write_text(out / "figure.svg", plot_summary_csv(csv, log_y));

  json report;
  report["config"] = json::parse(serialize_config(cfg));
  json runs = json::array();
  for (const auto& r : res.rows) {
    json a{{"corollary1", opt_json(r.analysis.corollary1)},
           {"theorem2", opt_json(r.analysis.theorem2)},
           {"lambda_min_feasible", opt_json(r.analysis.lambda_min_feasible)},
           {"descent_monotone", r.analysis.descent_monotone},
           {"stationary", r.analysis.stationary},
           {"empirical_gamma_max", opt_json(r.analysis.empirical_gamma_max)},
           {"max_iterate_norm", r.analysis.max_iterate_norm}};
    runs.push_back({{"method", to_string(r.method)},
                    {"sparsity", r.sparsity},
                    {"seed", r.seed},
                    {"jsonl", r.jsonl},
                    {"wall_seconds", r.wall_seconds},
                    {"aborted", r.aborted},
                    {"error", r.error},
                    {"analysis", a}});
  }
  report["runs"] = runs;
  report["total_wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(out / "report.json", report.dump(2) + "\n");
  return res;
}

// --- oracle and condition checks --------------------------------------------

std::vector<OracleEntry> run_oracle(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.objective.kind != ObjectiveKind::kSparseRegression) {
    throw ConfigError("field 'objective.kind': the oracle needs a sparse_regression objective");
  }
  if (cfg.objective.d > kBestSubsetMaxDim) {
    throw GuardError("oracle: d=" + std::to_string(cfg.objective.d) + " exceeds the enumeration limit of " +
                     std::to_string(kBestSubsetMaxDim));
  }
  std::vector<OracleEntry> out;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = cfg.seed + r;
    Rng rng(seed);
    const auto inst = sparse_regression_make(rng, cfg.objective.n, cfg.objective.d, cfg.objective.k_true,
                                             cfg.objective.noise);
    for (double s : cfg.sparsities) {
      const std::size_t k = budget_for(s, cfg.objective.d);
      const auto best = best_subset_ls(inst.objective->x(), inst.objective->y(), k);
      out.push_back({seed, s, k, best.support, best.loss});
    }
  }
  return out;
}

std::string oracle_json(const std::vector<OracleEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"seed", e.seed}, {"sparsity", e.sparsity}, {"k", e.k}, {"support", e.support}, {"loss", e.loss}});
  }
  json j;
  j["instances"] = arr;
  return j.dump(2) + "\n";
}

CheckReport check_conditions(const ConvergenceParams& p) {
  p.validate();
  CheckReport r;
  r.corollary1 = check_corollary1(p);
  r.theorem2 = check_theorem2(p);
  try {
    r.lambda_min_feasible = min_feasible_lambda(p.beta, p.mu, p.gamma);
  } catch (const std::invalid_argument&) {
  }
  return r;
}

std::string format_check_report(const ConvergenceParams& p, const CheckReport& r) {
  const double c1 = p.beta * p.beta / p.lam - (p.lam - p.mu) / 2.0;
  std::ostringstream os;
  os << "corollary1: " << (r.corollary1 ? "satisfied" : "violated") << " (lhs " << format_real(c1) << ")\n";
  os << "theorem2: " << (r.theorem2 ? "satisfied" : "violated") << " (lhs " << format_real(theorem2_lhs(p)) << ")\n";
  os << "min_feasible_lambda: " << (r.lambda_min_feasible ? format_real(*r.lambda_min_feasible) : "none") << '\n';
  return os.str();
}

}  // namespace elsa
