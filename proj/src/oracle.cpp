#include "elsa/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace elsa {

Eigen::VectorXd restricted_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         const std::vector<std::size_t>& support, double jitter) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  if (support.empty()) return w;
  const auto s = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd xs(x.rows(), s);
  for (Eigen::Index j = 0; j < s; ++j) xs.col(j) = x.col(static_cast<Eigen::Index>(support[j]));
  Eigen::MatrixXd gram = xs.transpose() * xs;
  gram.diagonal().array() += jitter;
  const Eigen::VectorXd ws = gram.ldlt().solve(xs.transpose() * y);
  for (Eigen::Index j = 0; j < s; ++j) w(static_cast<Eigen::Index>(support[j])) = ws(j);
  return w;
}

BestSubsetResult best_subset_ls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k) {
  const auto d = static_cast<std::size_t>(x.cols());
  if (d > kBestSubsetMaxDim) {
    throw std::invalid_argument("best_subset_ls: d=" + std::to_string(d) + " exceeds the enumeration guard of " +
                                std::to_string(kBestSubsetMaxDim));
  }
  if (k > d) throw std::invalid_argument("best_subset_ls: k > d");
  if (x.rows() != y.size()) throw ShapeError("best_subset_ls: X rows must match y");
  const double n2 = 2.0 * static_cast<double>(x.rows());

  BestSubsetResult best;
  best.loss = std::numeric_limits<double>::infinity();
  // Lexicographic walk over k-combinations of {0..d-1}.
  std::vector<std::size_t> comb(k);
  for (std::size_t i = 0; i < k; ++i) comb[i] = i;
  while (true) {
    Eigen::VectorXd w = restricted_least_squares(x, y, comb);
    const double loss = (x * w - y).squaredNorm() / n2;
    if (loss < best.loss) best = {comb, std::move(w), loss};
    std::size_t i = k;
    while (i > 0 && comb[i - 1] == d - k + i - 1) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
  return best;
}

namespace {

// Sum of w_i * (c_i - v_i)^2, accumulated in ascending order so that equal
// multisets of terms produce bit-identical totals.
double sorted_distance(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

double weight_at(const Tensor* w, std::size_t i) { return w ? (*w)[i] : 1.0; }

double candidate_distance(const Tensor& v, const Tensor* w, const Tensor& c) {
  std::vector<double> terms(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double diff = c[i] - v[i];
    terms[i] = weight_at(w, i) * diff * diff;
  }
  return sorted_distance(std::move(terms));
}

template <class Feasible>
bool verify_by_enumeration(const Tensor& v, const Tensor* w, const Tensor& candidate, Feasible feasible) {
  require_same_shape(v, candidate, "verify_projection");
  if (w) require_same_shape(v, *w, "verify_projection weights");
  const std::size_t d = v.size();
  if (d > kVerifyProjectionMaxDim) throw std::invalid_argument("verify_projection: dimension exceeds guard");

  std::uint32_t cand_mask = 0;
  for (std::size_t i = 0; i < d; ++i) {
    if (candidate[i] != 0.0) cand_mask |= 1u << i;
  }
  if (!feasible(cand_mask)) return false;

  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
    if (!feasible(mask)) continue;
    std::vector<double> terms(d);
    for (std::size_t i = 0; i < d; ++i) terms[i] = (mask >> i) & 1u ? 0.0 : weight_at(w, i) * v[i] * v[i];
    best = std::min(best, sorted_distance(std::move(terms)));
  }
  return candidate_distance(v, w, candidate) <= best;
}

}  // namespace

bool verify_projection(const Tensor& v, std::size_t k, const Tensor* w, const Tensor& candidate) {
  return verify_by_enumeration(v, w, candidate,
                               [k](std::uint32_t mask) { return static_cast<std::size_t>(std::popcount(mask)) <= k; });
}

bool verify_projection_nm(const Tensor& v, std::size_t n, std::size_t m, const Tensor* w, const Tensor& candidate) {
  if (m == 0 || v.last_dim() % m != 0) throw std::invalid_argument("verify_projection_nm: indivisible dimension");
  const std::size_t d = v.size();
  return verify_by_enumeration(v, w, candidate, [=](std::uint32_t mask) {
    for (std::size_t start = 0; start < d; start += m) {
      const std::uint32_t group = (mask >> start) & ((1u << m) - 1u);
      if (static_cast<std::size_t>(std::popcount(group)) > n) return false;
    }
    return true;
  });
}

double stationarity_residual(const Objective& obj, const ParamMap& xbar, const SparsityConstraint& constraint,
                             double lam) {
  if (!(lam > 0.0)) throw std::invalid_argument("stationarity: lam must be positive");
  const ParamMap step = axpy(-1.0 / lam, obj.grad_train(xbar), xbar);
  return norms(project_constraint(step, constraint) - xbar).l2;
}

bool certify_lambda_stationary(const Objective& obj, const ParamMap& xbar, const SparsityConstraint& constraint,
                               double lam, double tol) {
  if (!constraint.is_satisfied(xbar)) return false;
  return stationarity_residual(obj, xbar, constraint, lam) <= tol;
}

}  // namespace elsa
