#pragma once

#include <optional>
#include <vector>

#include "elsa/objectives.hpp"
#include "elsa/projection.hpp"
#include "elsa/records.hpp"
#include "elsa/tensor.hpp"

namespace elsa {

/// Smoothness, weak convexity, penalty and inexactness constants of a run.
struct ConvergenceParams {
  double beta = 0.0;
  double mu = 0.0;
  double lam = 1.0;
  double gamma = 0.0;

  /// Throws std::invalid_argument unless all finite, beta, mu >= 0, lam > 0, 0 <= gamma < 1.
  void validate() const;
};

/// Augmented Lagrangian in scaled-dual form, f(x) + lam/2 ||x - z + u||^2 - lam/2 ||u||^2.
double aug_lagrangian_scaled(double fx, const ParamMap& x, const ParamMap& z, const ParamMap& u_scaled, double lam);

/// Unscaled form f(x) + <y, x - z> + lam/2 ||x - z||^2 with y = lam * u_scaled.
double aug_lagrangian_unscaled(double fx, const ParamMap& x, const ParamMap& z, const ParamMap& y, double lam);

/// Evaluates both forms, throws std::logic_error if they disagree beyond 1e-9
/// (relative to the magnitude of the terms) and returns the scaled one.
/// Throws std::domain_error when z is infeasible (the indicator is infinite).
double aug_lagrangian(const Objective& obj, const ParamMap& x, const ParamMap& z, const ParamMap& u_scaled, double lam,
                      const SparsityConstraint& constraint);

/// beta^2 / lam - (lam - mu) / 2 < 0.
bool check_corollary1(const ConvergenceParams& p);

/// Left-hand side of the ELSA-Q convergence condition.
double theorem2_lhs(const ConvergenceParams& p);
/// theorem2_lhs(p) < 0.
bool check_theorem2(const ConvergenceParams& p);

/// Smallest lam in (mu, search_hi] satisfying check_theorem2, by bisection to 1e-7.
/// The returned value itself satisfies the predicate. Throws std::invalid_argument
/// when gamma >= 1 or no lam in range works.
double min_feasible_lambda(double beta, double mu, double gamma, double search_hi = 1e6);

/// ||x - x_star|| / min(||x - z||, ||x - x_prev||); 0 when both are zero,
/// +inf when only the denominator vanishes.
double measure_gamma(const ParamMap& x_star, const ParamMap& x, const ParamMap& z, const ParamMap& x_prev);

struct DescentAudit {
  bool monotone = true;
  double worst_violation = 0.0;  // largest L_{t+1} - L_t, floored at 0
};

/// Checks L_{t+1} <= L_t + tol over consecutive records.
DescentAudit descent_audit(const std::vector<RoundRecord>& records, double tol);

/// Per-run theory report. Condition flags are empty when the objective's
/// constants are unknown.
struct AnalysisSummary {
  std::optional<bool> corollary1;
  std::optional<bool> theorem2;
  std::optional<double> lambda_min_feasible;
  bool descent_monotone = false;
  bool stationary = false;
  std::optional<double> empirical_gamma_max;
  double max_iterate_norm = 0.0;
};

}  // namespace elsa
