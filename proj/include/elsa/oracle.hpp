#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "elsa/objectives.hpp"
#include "elsa/projection.hpp"
#include "elsa/tensor.hpp"

namespace elsa {

inline constexpr std::size_t kBestSubsetMaxDim = 16;
inline constexpr std::size_t kVerifyProjectionMaxDim = 12;
inline constexpr double kOracleRidgeJitter = 1e-10;
inline constexpr double kDefaultStationarityTol = 1e-4;

struct BestSubsetResult {
  std::vector<std::size_t> support;  // sorted
  Eigen::VectorXd weights;           // full length d, zero off the support
  double loss = 0.0;                 // 1/(2n) ||X w - y||^2
};

/// Exhaustive best-subset least squares over all C(d, k) supports.
/// Throws std::invalid_argument when d exceeds kBestSubsetMaxDim or k > d.
BestSubsetResult best_subset_ls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k);

/// Least squares restricted to `support` via ridge-jittered normal equations.
Eigen::VectorXd restricted_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         const std::vector<std::size_t>& support,
                                         double jitter = kOracleRidgeJitter);

/// Confirms `candidate` attains the minimum of sum_i w_i (c_i - v_i)^2 over all
/// supports of size <= k (unit weights when w is null), by enumeration.
bool verify_projection(const Tensor& v, std::size_t k, const Tensor* w, const Tensor& candidate);

/// Same, over all supports with at most n nonzeros per consecutive group of m.
bool verify_projection_nm(const Tensor& v, std::size_t n, std::size_t m, const Tensor* w, const Tensor& candidate);

/// xbar is lambda-stationary when ||proj_S(xbar - grad f(xbar)/lam) - xbar|| <= tol,
/// with the gradient taken on the full training split. Infeasible points are never stationary.
bool certify_lambda_stationary(const Objective& obj, const ParamMap& xbar, const SparsityConstraint& constraint,
                               double lam, double tol = kDefaultStationarityTol);

/// The residual ||proj_S(xbar - grad f(xbar)/lam) - xbar||.
double stationarity_residual(const Objective& obj, const ParamMap& xbar, const SparsityConstraint& constraint,
                             double lam);

}  // namespace elsa
