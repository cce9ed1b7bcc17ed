#include <doctest.h>

#include <chrono>

#include "elsa/oracle.hpp"

using namespace elsa;

TEST_SUITE("oracle") {
  TEST_CASE("k zero gives the null model") {
    Rng rng(1);
    auto inst = sparse_regression_make(rng, 30, 6, 2, 0.1);
    const auto& y = inst.objective->y();
    const auto r = best_subset_ls(inst.objective->x(), y, 0);
    CHECK(r.support.empty());
    CHECK(r.loss == doctest::Approx(0.5 * y.squaredNorm() / 30));
  }

  TEST_CASE("recovers a noiseless planted support") {
    Rng rng(2);
    auto inst = sparse_regression_make(rng, 100, 10, 3, 0.0);
    const auto r = best_subset_ls(inst.objective->x(), inst.objective->y(), 3);
    CHECK(r.support == inst.support);
    CHECK(r.loss < 1e-12);
  }

  TEST_CASE("loss is non-increasing in k") {
    Rng rng(3);
    auto inst = sparse_regression_make(rng, 60, 8, 3, 0.5);
    double prev = 1e300;
    for (std::size_t k = 0; k <= 8; ++k) {
      const double l = best_subset_ls(inst.objective->x(), inst.objective->y(), k).loss;
      CHECK(l <= prev + 1e-12);
      prev = l;
    }
  }

  TEST_CASE("d 10 k 3 is fast") {
    Rng rng(4);
    auto inst = sparse_regression_make(rng, 200, 10, 3, 0.1);
    const auto t0 = std::chrono::steady_clock::now();
    best_subset_ls(inst.objective->x(), inst.objective->y(), 3);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
  }

  TEST_CASE("guards") {
    CHECK_THROWS_AS(best_subset_ls(Eigen::MatrixXd::Zero(5, 17), Eigen::VectorXd::Zero(5), 2), std::invalid_argument);
    CHECK_THROWS_AS(best_subset_ls(Eigen::MatrixXd::Zero(5, 4), Eigen::VectorXd::Zero(5), 5), std::invalid_argument);
  }

  TEST_CASE("stationarity of the constrained optimum of a separable quadratic") {
    // f = 1/2 ||x - c||^2: the top-k truncation of c is the constrained minimizer
    const QuadraticObjective q(Eigen::MatrixXd::Identity(4, 4), Eigen::Vector4d(3, -1, 2, 0.5));
    SparsityConstraint c{GlobalTopK{2}};
    const auto xbar = QuadraticObjective::wrap(Tensor::vector({3, 0, 2, 0}));
    CHECK(stationarity_residual(q, xbar, c, 1.0) < 1e-12);
    CHECK(certify_lambda_stationary(q, xbar, c, 1.0, 1e-9));
    const auto wrong = QuadraticObjective::wrap(Tensor::vector({3, -1, 0, 0}));
    CHECK_FALSE(certify_lambda_stationary(q, wrong, c, 1.0, 1e-6));
    const auto infeasible = QuadraticObjective::wrap(Tensor::vector({3, -1, 2, 0}));
    CHECK_FALSE(certify_lambda_stationary(q, infeasible, c, 1.0, 1e9));
  }
}
