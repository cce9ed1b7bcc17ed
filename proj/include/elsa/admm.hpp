#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "elsa/objectives.hpp"
#include "elsa/optim.hpp"
#include "elsa/projection.hpp"
#include "elsa/quantization.hpp"
#include "elsa/records.hpp"
#include "elsa/tensor.hpp"

namespace elsa {

enum class ProjectionMode { kEuclidean, kFisher };
/// How the x-subproblem is solved: a fixed budget of Adam steps, or the objective's closed form.
enum class XUpdate { kAdam, kExact };
/// Sub-step order inside a round. kXZU is the textbook x, z, u sweep. kZXU
/// projects first so the x-update and the dual step see the same z, which is
/// the order under which the augmented Lagrangian provably decreases.
enum class UpdateOrder { kXZU, kZXU };

std::string to_string(ProjectionMode m);
ProjectionMode projection_mode_from_string(const std::string& s);
std::string to_string(XUpdate m);
XUpdate x_update_from_string(const std::string& s);
std::string to_string(UpdateOrder o);
UpdateOrder update_order_from_string(const std::string& s);

/// Low-precision storage formats for the dual (u) and auxiliary (z) states.
struct QuantConfig {
  QuantFormat u_format = QuantFormat::bf16();
  QuantFormat z_format = QuantFormat::fp8e4m3();
};

struct SolverConfig {
  SparsityConstraint constraint;
  double lam_max = 1.0;
  ScheduleKind lam_schedule = ScheduleKind::kCosineRampUp;  // from 0 up to lam_max
  double lr = 1e-2;
  ScheduleKind lr_schedule = ScheduleKind::kLinearDecay;  // from lr down to lr_end
  double lr_end = 0.0;
  std::int64_t interval = 32;  // inner steps per z/u update
  std::int64_t total_inner_steps = 4096;
  std::size_t batch_size = 8;  // consumed when building stochastic objectives
  ProjectionMode projection_mode = ProjectionMode::kEuclidean;
  XUpdate x_update = XUpdate::kAdam;
  UpdateOrder order = UpdateOrder::kXZU;
  std::optional<QuantConfig> quant;
  AdamConfig adam;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
  Schedule lam_schedule_spec() const;
  Schedule lr_schedule_spec() const;
  std::int64_t num_rounds() const;
};

using QuantizedMap = std::map<std::string, QuantizedTensor>;

struct AdmmState {
  ParamMap x, z, u;  // u is the scaled dual
  std::int64_t round = 0;
  std::int64_t inner_step = 0;
  double lam_current = 0.0;
  std::optional<QuantizedMap> z_store, u_store;
  AdamState adam;
  Rng rng;
};

/// x = x0, z = proj_S(x0) (stored quantized when enabled), u = 0.
AdmmState init_state(const Objective& obj, const SolverConfig& cfg, const ParamMap& x0);

/// One full-precision round: inner x-update at the current penalty, z <- proj_S(x + u),
/// u <- u + x - z, then the penalty advances along its schedule. Ignores cfg.quant.
RoundRecord elsa_round(AdmmState& state, Objective& obj, const SolverConfig& cfg);

/// As elsa_round, but z is rematerialized from its quantized store after the
/// projection and u <- R(Q(u + x - z)). Requires cfg.quant.
RoundRecord elsaq_round(AdmmState& state, Objective& obj, const SolverConfig& cfg);

struct RunResult {
  AdmmState state;
  std::vector<RoundRecord> records;
  bool aborted = false;
  std::string error;  // diagnostic when aborted
};

/// What a round observer sees: the iterates before the round and the state after it.
struct RoundView {
  const ParamMap& x_prev;
  const ParamMap& z_prev;
  const ParamMap& u_prev;
  const AdmmState& state;
  const RoundRecord& record;
};
using RoundObserver = std::function<void(const RoundView&)>;

/// Rounds until total_inner_steps is consumed; the feasible answer is state.z.
/// Uses elsaq_round when cfg.quant is set. Non-finite losses or objective
/// failures stop the run early and keep the records produced so far.
RunResult run(Objective& obj, const SolverConfig& cfg, const ParamMap& x0, const RoundObserver& observer = {});

/// Plain Adam on f, e.g. to produce a dense starting model.
ParamMap adam_minimize(Objective& obj, ParamMap x0, std::int64_t steps, double lr, std::uint64_t seed,
                       ScheduleKind lr_schedule = ScheduleKind::kLinearDecay);

}  // namespace elsa
