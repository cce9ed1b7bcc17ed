#include "elsa/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace elsa {

void ConvergenceParams::validate() const {
  if (!std::isfinite(beta) || !std::isfinite(mu) || !std::isfinite(lam) || !std::isfinite(gamma)) {
    throw std::invalid_argument("convergence parameters must be finite");
  }
  if (beta < 0.0 || mu < 0.0) throw std::invalid_argument("beta and mu must be non-negative");
  if (lam <= 0.0) throw std::invalid_argument("lam must be positive");
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma must lie in [0, 1)");
}

double aug_lagrangian_scaled(double fx, const ParamMap& x, const ParamMap& z, const ParamMap& u_scaled, double lam) {
  const double r = norms(x - z + u_scaled).l2;
  const double u = norms(u_scaled).l2;
  return fx + 0.5 * lam * r * r - 0.5 * lam * u * u;
}

double aug_lagrangian_unscaled(double fx, const ParamMap& x, const ParamMap& z, const ParamMap& y, double lam) {
  const ParamMap r = x - z;
  const double rn = norms(r).l2;
  return fx + dot(y, r) + 0.5 * lam * rn * rn;
}

double aug_lagrangian(const Objective& obj, const ParamMap& x, const ParamMap& z, const ParamMap& u_scaled, double lam,
                      const SparsityConstraint& constraint) {
  if (!constraint.is_satisfied(z)) throw std::domain_error("aug_lagrangian: z is infeasible");
  const double fx = obj.eval_reference(x);
  const double scaled = aug_lagrangian_scaled(fx, x, z, u_scaled, lam);
  const double unscaled = aug_lagrangian_unscaled(fx, x, z, lam * u_scaled, lam);
  const double un = norms(u_scaled).l2;
  const double rn = norms(x - z + u_scaled).l2;
  const double magnitude = std::max({1.0, std::abs(fx), lam * un * un, lam * rn * rn});
  if (std::abs(scaled - unscaled) > 1e-9 * magnitude) {
    throw std::logic_error("aug_lagrangian: scaled and unscaled forms disagree");
  }
  return scaled;
}

bool check_corollary1(const ConvergenceParams& p) {
  return p.beta * p.beta / p.lam - (p.lam - p.mu) / 2.0 < 0.0;
}

double theorem2_lhs(const ConvergenceParams& p) {
  const double b = p.beta, m = p.mu, l = p.lam, g = p.gamma;
  return b * b / l + b * (l + b) * g / l + g * g * (l + b) / 2.0 - (1.0 - g) * (1.0 - g) * (l - m) / 2.0;
}

bool check_theorem2(const ConvergenceParams& p) { return theorem2_lhs(p) < 0.0; }

double min_feasible_lambda(double beta, double mu, double gamma, double search_hi) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("min_feasible_lambda: gamma must lie in [0, 1)");
  if (!(beta >= 0.0 && mu >= 0.0)) throw std::invalid_argument("min_feasible_lambda: beta, mu must be >= 0");
  auto ok = [&](double lam) { return check_theorem2({beta, mu, lam, gamma}); };
  if (!(search_hi > mu) || !ok(search_hi)) {
    throw std::invalid_argument("min_feasible_lambda: no feasible lambda in (mu, search_hi]");
  }
  // For gamma < 1/2 the left-hand side decreases in lambda, so the feasible set is an interval.
  double lo = mu;
  double hi = search_hi;
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

double measure_gamma(const ParamMap& x_star, const ParamMap& x, const ParamMap& z, const ParamMap& x_prev) {
  const double num = norms(x - x_star).l2;
  const double den = std::min(norms(x - z).l2, norms(x - x_prev).l2);
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

DescentAudit descent_audit(const std::vector<RoundRecord>& records, double tol) {
  DescentAudit a;
  for (std::size_t t = 1; t < records.size(); ++t) {
    const double inc = records[t].aug_lagrangian - records[t - 1].aug_lagrangian;
    a.worst_violation = std::max(a.worst_violation, inc);
    if (!(inc <= tol)) a.monotone = false;
  }
  return a;
}

}  // namespace elsa
