#include "elsa/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace elsa {

AdamState AdamState::init(const ParamMap& layout, double lr, AdamConfig config) {
  AdamState s;
  s.m = zeros_like(layout);
  s.v = zeros_like(layout);
  s.config = config;
  s.lr = lr;
  return s;
}

void adam_step(AdamState& state, ParamMap& params, const ParamMap& grad) {
  require_same_layout(params, grad, "adam_step");
  require_same_layout(params, state.m, "adam_step state");
  if (!all_finite(grad)) throw std::invalid_argument("adam_step: non-finite gradient");

  const auto& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (auto& [id, x] : params) {
    const Tensor& g = grad.at(id);
    Tensor& m = state.m.at(id);
    Tensor& v = state.v.at(id);
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      x[i] -= state.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

ParamMap proximal_grad(const ParamMap& obj_grad, const ParamMap& x, const ParamMap& z, const ParamMap& u,
                       double lam) {
  if (!(lam >= 0.0)) throw std::invalid_argument("proximal_grad: lam must be non-negative");
  require_same_layout(obj_grad, x, "proximal_grad");
  require_same_layout(x, z, "proximal_grad");
  require_same_layout(x, u, "proximal_grad");
  ParamMap out = obj_grad;
  if (lam == 0.0) return out;
  for (auto& [id, g] : out) {
    const Tensor& xt = x.at(id);
    const Tensor& zt = z.at(id);
    const Tensor& ut = u.at(id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += lam * (xt[i] - zt[i] + ut[i]);
  }
  return out;
}

ImportanceWeights fisher_diag(const AdamState& state) {
  if (state.step < 1) throw std::logic_error("fisher_diag: no Adam step taken yet");
  const double bc2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step));
  return (1.0 / bc2) * state.v;
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::kConstant: return "constant";
    case ScheduleKind::kLinearDecay: return "linear_decay";
    case ScheduleKind::kCosineRampUp: return "cosine_ramp_up";
  }
  return "constant";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "constant") return ScheduleKind::kConstant;
  if (s == "linear_decay") return ScheduleKind::kLinearDecay;
  if (s == "cosine_ramp_up") return ScheduleKind::kCosineRampUp;
  throw std::invalid_argument("unknown schedule '" + s + "'");
}

double schedule_value(const Schedule& s, std::int64_t step) {
  if (s.kind == ScheduleKind::kConstant) return s.start;
  const std::int64_t total = std::max<std::int64_t>(s.total_steps, 1);
  const double frac = static_cast<double>(std::clamp<std::int64_t>(step, 0, total)) / static_cast<double>(total);
  if (s.kind == ScheduleKind::kLinearDecay) return s.start + (s.end - s.start) * frac;
  return s.start + (s.end - s.start) * (1.0 - std::cos(std::numbers::pi * frac)) / 2.0;
}

}  // namespace elsa
