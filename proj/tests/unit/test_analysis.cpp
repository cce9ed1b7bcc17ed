#include <doctest.h>

#include <cmath>
#include <limits>

#include "elsa/analysis.hpp"

using namespace elsa;

namespace {
// Hand-expanded left side of the inexact-update condition.
double lhs_by_hand(double beta, double mu, double lam, double g) {
  return beta * beta / lam + beta * (lam + beta) * g / lam + g * g * (lam + beta) / 2 - (1 - g) * (1 - g) * (lam - mu) / 2;
}
}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("corollary examples") {
    CHECK(check_corollary1({1, 0, 2, 0}));   // 0.5 - 1 < 0
    CHECK_FALSE(check_corollary1({1, 0, 1, 0}));  // 1 - 0.5 > 0
    CHECK_FALSE(check_corollary1({2, 0, 1, 0}));  // 4 - 0.5 > 0
    CHECK_FALSE(check_corollary1({1, 0, std::sqrt(2.0) * (1 - 1e-9), 0}));
    CHECK(check_corollary1({0, 0.5, 0.6, 0}));  // constant gradient
  }

  TEST_CASE("theorem examples") {
    CHECK(theorem2_lhs({1, 0, 2, 0.1}) == doctest::Approx(-0.145));
    CHECK(check_theorem2({1, 0, 2, 0.1}));
    CHECK(theorem2_lhs({1, 0, 2, 0.5}) == doctest::Approx(1.375));
    CHECK_FALSE(check_theorem2({1, 0, 2, 0.5}));
  }

  TEST_CASE("theorem lhs matches hand expansion") {
    Rng rng(1);
    for (int t = 0; t < 1000; ++t) {
      const double b = rng.uniform(0, 10), m = rng.uniform(0, 5), l = rng.uniform(m + 0.1, 100), g = rng.uniform(0, 0.99);
      REQUIRE(theorem2_lhs({b, m, l, g}) == doctest::Approx(lhs_by_hand(b, m, l, g)).epsilon(1e-12));
    }
  }

  TEST_CASE("validation") {
    CHECK_THROWS_AS(ConvergenceParams({1, 0, 1, 1.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(ConvergenceParams({1, 0, 0, 0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(ConvergenceParams({-1, 0, 1, 0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(ConvergenceParams({NAN, 0, 1, 0}).validate(), std::invalid_argument);
  }

  TEST_CASE("theorem with exact updates reduces to the corollary") {
    Rng rng(2);
    for (int t = 0; t < 1000; ++t) {
      const ConvergenceParams p{rng.uniform(0, 10), rng.uniform(0, 5), rng.uniform(0.01, 50), 0.0};
      REQUIRE(check_theorem2(p) == check_corollary1(p));
    }
  }

  TEST_CASE("scaled and unscaled forms agree") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
      const double lam = rng.uniform(0.1, 10), fx = rng.normal();
      const ParamMap x{{"x", rand_gaussian(rng, {5}, 0, 1)}}, z{{"x", rand_gaussian(rng, {5}, 0, 1)}};
      const ParamMap u{{"x", rand_gaussian(rng, {5}, 0, 1)}};
      REQUIRE(aug_lagrangian_scaled(fx, x, z, u, lam) ==
              doctest::Approx(aug_lagrangian_unscaled(fx, x, z, lam * u, lam)).epsilon(1e-12));
    }
  }

  TEST_CASE("augmented lagrangian rejects infeasible z") {
    const QuadraticObjective q(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
    const auto x = QuadraticObjective::wrap(Tensor::vector({1, 1}));
    const auto u = QuadraticObjective::wrap(Tensor::vector({0, 0}));
    const SparsityConstraint c{GlobalTopK{1}};
    CHECK_THROWS_AS(aug_lagrangian(q, x, x, u, 1.0, c), std::domain_error);
    const auto z = QuadraticObjective::wrap(Tensor::vector({1, 0}));
    CHECK(aug_lagrangian(q, x, z, u, 2.0, c) == doctest::Approx(1.0 + 1.0));
  }

  TEST_CASE("min feasible lambda") {
    CHECK(min_feasible_lambda(1, 0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
    for (double g : {0.0, 0.1, 0.3}) {
      const double l = min_feasible_lambda(2, 0.5, g);
      CHECK(check_theorem2({2, 0.5, l, g}));
      CHECK_FALSE(check_theorem2({2, 0.5, l - 1e-3, g}));
    }
    CHECK(min_feasible_lambda(1, 0, 0.1) < min_feasible_lambda(1, 0, 0.2));
    CHECK_THROWS_AS(min_feasible_lambda(1, 0, 1.0), std::invalid_argument);
  }

  TEST_CASE("augmented lagrangian example") {
    const ParamMap x{{"x", Tensor::vector({1})}};
    const ParamMap z{{"x", Tensor::vector({0})}};
    // f = 1/2, penalty = 1
    CHECK(aug_lagrangian_scaled(0.5, x, z, z, 2.0) == doctest::Approx(1.5));
    const ParamMap u{{"x", Tensor::vector({0.5})}};
    const ParamMap y{{"x", Tensor::vector({1.0})}};
    CHECK(aug_lagrangian_scaled(0.5, x, z, u, 2.0) == doctest::Approx(aug_lagrangian_unscaled(0.5, x, z, y, 2.0)));
  }

  TEST_CASE("measure gamma") {
    const ParamMap xs{{"x", Tensor::vector({0})}};
    const ParamMap x{{"x", Tensor::vector({1})}};
    const ParamMap z{{"x", Tensor::vector({3})}};
    const ParamMap xp{{"x", Tensor::vector({5})}};
    CHECK(measure_gamma(xs, x, z, xp) == doctest::Approx(0.5));
    CHECK(measure_gamma(x, x, x, x) == 0.0);
    CHECK(std::isinf(measure_gamma(xs, x, x, x)));
  }

  TEST_CASE("descent audit") {
    std::vector<RoundRecord> r(3);
    r[0].aug_lagrangian = 3;
    r[1].aug_lagrangian = 2;
    r[2].aug_lagrangian = 2 + 1e-12;
    CHECK(descent_audit(r, 1e-9).monotone);
    r[2].aug_lagrangian = 2.5;
    const auto a = descent_audit(r, 1e-9);
    CHECK_FALSE(a.monotone);
    CHECK(a.worst_violation == doctest::Approx(0.5));
  }
}
