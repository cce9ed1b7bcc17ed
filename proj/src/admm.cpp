#include "elsa/admm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "elsa/analysis.hpp"

namespace elsa {

std::string to_string(ProjectionMode m) { return m == ProjectionMode::kEuclidean ? "euclidean" : "fisher"; }

ProjectionMode projection_mode_from_string(const std::string& s) {
  if (s == "euclidean") return ProjectionMode::kEuclidean;
  if (s == "fisher") return ProjectionMode::kFisher;
  throw std::invalid_argument("unknown projection_mode '" + s + "'");
}

std::string to_string(XUpdate m) { return m == XUpdate::kAdam ? "adam" : "exact"; }

XUpdate x_update_from_string(const std::string& s) {
  if (s == "adam") return XUpdate::kAdam;
  if (s == "exact") return XUpdate::kExact;
  throw std::invalid_argument("unknown x_update '" + s + "'");
}

std::string to_string(UpdateOrder o) { return o == UpdateOrder::kXZU ? "xzu" : "zxu"; }

UpdateOrder update_order_from_string(const std::string& s) {
  if (s == "xzu") return UpdateOrder::kXZU;
  if (s == "zxu") return UpdateOrder::kZXU;
  throw std::invalid_argument("unknown update order '" + s + "'");
}

void SolverConfig::validate() const {
  if (!(lam_max > 0.0) || !std::isfinite(lam_max)) throw std::invalid_argument("lam_max must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
  if (!(lr_end >= 0.0)) throw std::invalid_argument("lr_end must be non-negative");
  if (interval < 1) throw std::invalid_argument("interval must be >= 1");
  if (total_inner_steps < 1) throw std::invalid_argument("total_inner_steps must be >= 1");
  if (lam_schedule == ScheduleKind::kLinearDecay) throw std::invalid_argument("lam_schedule must be constant or cosine");
}

Schedule SolverConfig::lam_schedule_spec() const {
  if (lam_schedule == ScheduleKind::kConstant) return {ScheduleKind::kConstant, lam_max, lam_max, total_inner_steps};
  return {lam_schedule, 0.0, lam_max, total_inner_steps};
}

Schedule SolverConfig::lr_schedule_spec() const {
  if (lr_schedule == ScheduleKind::kConstant) return {ScheduleKind::kConstant, lr, lr, total_inner_steps};
  return {lr_schedule, lr, lr_end, total_inner_steps};
}

std::int64_t SolverConfig::num_rounds() const { return (total_inner_steps + interval - 1) / interval; }

namespace {

// Quantize every tensor, keep the store and return the rematerialized map
// together with the largest roundtrip error.
ParamMap store_quantized(const ParamMap& p, const QuantFormat& fmt, std::optional<QuantizedMap>& store, double& err) {
  err = 0.0;
  if (fmt.is_identity()) {
    store.reset();
    return p;
  }
  QuantizedMap qs;
  ParamMap out;
  for (const auto& [id, t] : p) {
    QuantizedTensor q = quantize(t, fmt);
    Tensor back = dequantize(q);
    err = std::max(err, norms(t - back).linf);
    qs.emplace(id, std::move(q));
    out.emplace(id, std::move(back));
  }
  store = std::move(qs);
  return out;
}

double sparsity_of(const ParamMap& z) {
  const auto d = total_size(z);
  return d == 0 ? 0.0 : 1.0 - static_cast<double>(norms(z).l0) / static_cast<double>(d);
}

RoundRecord admm_round(AdmmState& s, Objective& obj, const SolverConfig& cfg, const QuantConfig* quant) {
  const double lam = s.lam_current;
  const std::int64_t steps = std::min(cfg.interval, cfg.total_inner_steps - s.inner_step);
  if (steps <= 0) throw std::logic_error("admm round: inner step budget exhausted");
  const Schedule lr_sched = cfg.lr_schedule_spec();

  auto x_update = [&] {
    // argmin f(x) + lam/2 ||x - z + u||^2
    if (cfg.x_update == XUpdate::kExact) {
      auto x = obj.prox(s.z, s.u, lam);
      if (!x) throw std::invalid_argument("x_update=exact needs an objective with a closed-form prox");
      s.x = std::move(*x);
      s.inner_step += steps;
      return;
    }
    for (std::int64_t i = 0; i < steps; ++i) {
      if (obj.stochastic()) obj.resample(s.rng);
      s.adam.lr = schedule_value(lr_sched, s.inner_step);
      adam_step(s.adam, s.x, proximal_grad(obj.grad(s.x), s.x, s.z, s.u, lam));
      ++s.inner_step;
    }
  };

  double z_err = 0.0;
  auto z_update = [&] {
    const ParamMap v = s.x + s.u;
    std::optional<ImportanceWeights> w;
    if (cfg.projection_mode == ProjectionMode::kFisher && s.adam.step >= 1) w = fisher_diag(s.adam);
    ParamMap z = project_constraint(v, cfg.constraint, w ? &*w : nullptr);
    if (quant) z = store_quantized(z, quant->z_format, s.z_store, z_err);
    s.z = std::move(z);
  };

  if (cfg.order == UpdateOrder::kXZU) {
    x_update();
    z_update();
  } else {
    z_update();
    x_update();
  }

  // scaled dual ascent
  ParamMap u = s.u + (s.x - s.z);
  double u_err = 0.0;
  if (quant) u = store_quantized(u, quant->u_format, s.u_store, u_err);
  s.u = std::move(u);

  ++s.round;
  s.lam_current = schedule_value(cfg.lam_schedule_spec(), s.inner_step);

  RoundRecord r;
  r.round = s.round;
  r.inner_step = s.inner_step;
  r.loss_x = obj.eval_reference(s.x);
  r.loss_z = obj.eval_reference(s.z);
  r.primal_residual_l2 = norms(s.x - s.z).l2;
  r.aug_lagrangian = aug_lagrangian_scaled(r.loss_x, s.x, s.z, s.u, lam);
  r.sparsity_achieved = sparsity_of(s.z);
  r.lam = lam;
  r.lr = cfg.x_update == XUpdate::kAdam ? s.adam.lr : 0.0;
  r.quant_err_u_linf = u_err;
  r.quant_err_z_linf = z_err;
  return r;
}

}  // namespace

AdmmState init_state(const Objective& obj, const SolverConfig& cfg, const ParamMap& x0) {
  cfg.validate();
  require_same_layout(x0, obj.param_template(), "init_state");
  cfg.constraint.validate(x0);
  AdmmState s;
  s.x = x0;
  s.z = project_constraint(x0, cfg.constraint);
  s.u = zeros_like(x0);
  s.lam_current = schedule_value(cfg.lam_schedule_spec(), 0);
  s.adam = AdamState::init(x0, cfg.lr, cfg.adam);
  s.rng = Rng(cfg.seed);
  if (cfg.quant) {
    double err = 0.0;
    s.z = store_quantized(s.z, cfg.quant->z_format, s.z_store, err);
    s.u = store_quantized(s.u, cfg.quant->u_format, s.u_store, err);
  }
  return s;
}

RoundRecord elsa_round(AdmmState& state, Objective& obj, const SolverConfig& cfg) {
  return admm_round(state, obj, cfg, nullptr);
}

RoundRecord elsaq_round(AdmmState& state, Objective& obj, const SolverConfig& cfg) {
  if (!cfg.quant) throw std::invalid_argument("elsaq_round requires quantization formats");
  return admm_round(state, obj, cfg, &*cfg.quant);
}

RunResult run(Objective& obj, const SolverConfig& cfg, const ParamMap& x0, const RoundObserver& observer) {
  RunResult res{init_state(obj, cfg, x0), {}, false, {}};
  const std::int64_t rounds = cfg.num_rounds();
  res.records.reserve(static_cast<std::size_t>(rounds));
  for (std::int64_t r = 0; r < rounds; ++r) {
    try {
      std::optional<AdmmState> before;
      if (observer) before = res.state;
      RoundRecord rec = cfg.quant ? elsaq_round(res.state, obj, cfg) : elsa_round(res.state, obj, cfg);
      const bool finite = std::isfinite(rec.loss_x) && std::isfinite(rec.loss_z);
      res.records.push_back(rec);
      if (observer) observer(RoundView{before->x, before->z, before->u, res.state, res.records.back()});
      if (!finite) {
        res.aborted = true;
        res.error = "non-finite loss in round " + std::to_string(rec.round);
        break;
      }
    } catch (const std::exception& e) {
      res.aborted = true;
      res.error = "round " + std::to_string(res.state.round + 1) + ": " + e.what();
      break;
    }
  }
  return res;
}

ParamMap adam_minimize(Objective& obj, ParamMap x0, std::int64_t steps, double lr, std::uint64_t seed,
                       ScheduleKind lr_schedule) {
  AdamState adam = AdamState::init(x0, lr);
  Rng rng(seed);
  const Schedule sched = lr_schedule == ScheduleKind::kConstant ? Schedule{ScheduleKind::kConstant, lr, lr, steps}
                                                                : Schedule{lr_schedule, lr, 0.0, steps};
  for (std::int64_t i = 0; i < steps; ++i) {
    if (obj.stochastic()) obj.resample(rng);
    adam.lr = schedule_value(sched, i);
    adam_step(adam, x0, obj.grad(x0));
  }
  return x0;
}

}  // namespace elsa
