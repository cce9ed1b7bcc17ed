#pragma once

#include <cstdint>
#include <string>

#include "elsa/projection.hpp"
#include "elsa/tensor.hpp"

namespace elsa {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments for every parameter tensor. `step` counts completed updates.
struct AdamState {
  ParamMap m;
  ParamMap v;
  std::int64_t step = 0;
  AdamConfig config;
  double lr = 1e-3;

  static AdamState init(const ParamMap& layout, double lr, AdamConfig config = {});
};

/// One bias-corrected Adam update of `params` in place.
/// Throws std::invalid_argument on a non-finite gradient.
void adam_step(AdamState& state, ParamMap& params, const ParamMap& grad);

/// Gradient of the x-subproblem f(x) + (lam/2)||x - z + u||^2.
ParamMap proximal_grad(const ParamMap& obj_grad, const ParamMap& x, const ParamMap& z, const ParamMap& u,
                       double lam);

/// Bias-corrected second moment v / (1 - beta2^step), the diagonal empirical Fisher.
ImportanceWeights fisher_diag(const AdamState& state);

enum class ScheduleKind { kConstant, kLinearDecay, kCosineRampUp };

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

struct Schedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double start = 0.0;
  double end = 0.0;
  std::int64_t total_steps = 1;
};

/// Value at `step`, clamped to [0, total_steps].
double schedule_value(const Schedule& s, std::int64_t step);

}  // namespace elsa
