#include <doctest.h>

#include <cmath>

#include "elsa/admm.hpp"
#include "elsa/analysis.hpp"
#include "elsa/oracle.hpp"

using namespace elsa;

namespace {

std::vector<std::size_t> support_of(const Tensor& t) {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] != 0.0) s.push_back(i);
  return s;
}

}  // namespace

TEST_SUITE("admm") {
  TEST_CASE("one dimensional toy") {
    // (x - 2)^2 up to a constant
    QuadraticObjective f(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, 4.0));
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{1};
    const auto res = run(f, cfg, f.param_template());
    REQUIRE_FALSE(res.aborted);
    CHECK(std::abs(res.state.z.at("x")[0] - 2.0) < 1e-3);
  }

  TEST_CASE("recovers a planted support") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      auto inst = sparse_regression_make(rng, 100, 50, 5, 0.0);
      SolverConfig cfg;
      cfg.constraint.variant = GlobalTopK{5};
      cfg.seed = seed;
      const auto res = run(*inst.objective, cfg, inst.objective->param_template());
      hits += support_of(res.state.z.at("w")) == inst.support;
    }
    CHECK(hits >= 9);
  }

  TEST_CASE("dense budget matches plain adam") {
    Rng rng(1);
    auto inst = sparse_regression_make(rng, 100, 12, 4, 0.1);
    auto& f = *inst.objective;
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{12};
    const auto res = run(f, cfg, f.param_template());
    const auto dense = adam_minimize(f, f.param_template(), cfg.total_inner_steps, cfg.lr, 0);
    CHECK(f.eval(res.state.z) <= f.eval(dense) * 1.01);
  }

  TEST_CASE("record count and step accounting") {
    QuadraticObjective f(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Ones(3));
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{2};
    cfg.interval = 30;
    cfg.total_inner_steps = 100;
    const auto res = run(f, cfg, f.param_template());
    CHECK(res.records.size() == 4);
    CHECK(res.records.back().inner_step == 100);
    CHECK(res.records.back().round == 4);
    CHECK(res.state.adam.step == 100);
  }

  TEST_CASE("scaled dual update identity") {
    Rng rng(2);
    auto f = make_random_quadratic(rng, 10, 10.0, true);
    for (auto order : {UpdateOrder::kXZU, UpdateOrder::kZXU}) {
      SolverConfig cfg;
      cfg.constraint.variant = GlobalTopK{3};
      cfg.order = order;
      cfg.total_inner_steps = 320;
      int rounds = 0;
      run(f, cfg, f.param_template(), [&](const RoundView& v) {
        ++rounds;
        REQUIRE(v.state.u == v.u_prev + (v.state.x - v.state.z));
        REQUIRE(cfg.constraint.is_satisfied(v.state.z));
      });
      CHECK(rounds == 10);
    }
  }

  TEST_CASE("exact update with constant penalty descends") {
    Rng rng(3);
    auto f = make_random_quadratic(rng, 20, 10.0, true);
    const auto c = quadratic_constants(f);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{5};
    cfg.lam_max = min_feasible_lambda(c.beta, c.mu, 0.0);
    cfg.lam_schedule = ScheduleKind::kConstant;
    cfg.x_update = XUpdate::kExact;
    cfg.order = UpdateOrder::kZXU;
    cfg.interval = 1;
    cfg.total_inner_steps = 500;
    const auto res = run(f, cfg, f.param_template());
    CHECK(descent_audit(res.records, 1e-9).monotone);
    CHECK(certify_lambda_stationary(f, res.state.z, cfg.constraint, cfg.lam_max, 1e-6));
  }

  TEST_CASE("exact update needs a closed form") {
    MlpSpec spec;
    spec.dims = {2, 3, 1};
    Rng rng(4);
    auto f = make_teacher_student(rng, spec, 40);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{3};
    cfg.x_update = XUpdate::kExact;
    const auto res = run(f, cfg, f.initial_params(rng));
    CHECK(res.aborted);
    CHECK(res.error.find("closed-form") != std::string::npos);
  }

  TEST_CASE("identity formats reproduce full precision bit for bit") {
    Rng rng(5);
    auto inst = sparse_regression_make(rng, 60, 10, 3, 0.05);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{3};
    cfg.total_inner_steps = 512;
    const auto a = run(*inst.objective, cfg, inst.objective->param_template());
    cfg.quant = QuantConfig{QuantFormat::none(), QuantFormat::none()};
    const auto b = run(*inst.objective, cfg, inst.objective->param_template());
    CHECK(a.records == b.records);
    CHECK(a.state.z == b.state.z);
  }

  TEST_CASE("quantized run stores representable z") {
    Rng rng(6);
    auto inst = sparse_regression_make(rng, 60, 10, 3, 0.05);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{3};
    cfg.total_inner_steps = 256;
    cfg.quant = QuantConfig{};
    const auto res = run(*inst.objective, cfg, inst.objective->param_template());
    REQUIRE_FALSE(res.aborted);
    const auto& z = res.state.z.at("w");
    CHECK(quant_roundtrip(z, QuantFormat::fp8e4m3()) == z);
    CHECK(cfg.constraint.is_satisfied(res.state.z));
    bool any_err = false;
    for (const auto& r : res.records) any_err |= r.quant_err_u_linf > 0.0;
    CHECK(any_err);
  }

  TEST_CASE("fisher projection mode runs and stays feasible") {
    Rng rng(7);
    auto f = make_random_quadratic(rng, 30, 1e3, false);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{5};
    cfg.projection_mode = ProjectionMode::kFisher;
    cfg.total_inner_steps = 256;
    const auto res = run(f, cfg, f.param_template());
    REQUIRE_FALSE(res.aborted);
    CHECK(norms(res.state.z).l0 <= 5);
  }

  TEST_CASE("config validation") {
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{1};
    cfg.interval = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.interval = 8;
    cfg.lam_max = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.lam_max = 1;
    cfg.total_inner_steps = 20;
    CHECK(cfg.num_rounds() == 3);
  }

  TEST_CASE("runs are deterministic") {
    MlpSpec spec;
    spec.dims = {3, 6, 2};
    spec.batch_size = 8;
    Rng rng(8);
    auto f = make_teacher_student(rng, spec, 100);
    const auto x0 = f.initial_params(rng);
    SolverConfig cfg;
    cfg.constraint.variant = GlobalTopK{10};
    cfg.total_inner_steps = 256;
    cfg.seed = 3;
    auto g = f;
    const auto a = run(f, cfg, x0);
    const auto b = run(g, cfg, x0);
    CHECK(a.records == b.records);
  }

  TEST_CASE("enum names roundtrip") {
    for (auto o : {UpdateOrder::kXZU, UpdateOrder::kZXU}) CHECK(update_order_from_string(to_string(o)) == o);
    for (auto m : {XUpdate::kAdam, XUpdate::kExact}) CHECK(x_update_from_string(to_string(m)) == m);
    for (auto m : {ProjectionMode::kEuclidean, ProjectionMode::kFisher})
      CHECK(projection_mode_from_string(to_string(m)) == m);
    CHECK_THROWS(update_order_from_string("uzx"));
  }
}
