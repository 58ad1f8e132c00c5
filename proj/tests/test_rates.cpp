#include <doctest.h>

#include "errors.hpp"
#include "helpers.hpp"
#include "rates.hpp"

using namespace scerm;
using th::vec;

namespace {

RegimeParams base_params() {
  RegimeParams p;
  p.B1bar = 1;
  p.B2bar = 2;
  p.B1star = 1;
  p.B2star = 100;
  p.R = 1;
  p.theta_norm = 1;
  p.L = 1;
  p.Q = 1;
  p.r = 0.5;
  p.alpha = 2;
  p.delta = 0.1;
  return p;
}

}  // namespace

TEST_CASE("lambda schedules") {
  auto p = base_params();
  p.delta = 0.25;
  CHECK(lambda_schedule(Regime::None, 1024, p).lambda == doctest::Approx(16.0 * std::sqrt(std::log(8.0) / 1024.0)));
  CHECK(lambda_schedule(Regime::None, 1024, p).lambda == doctest::Approx(0.72101).epsilon(1e-5));

  auto s = base_params();
  s.L = 16;  // C0 = 256 (B1*/L)^2 = 1
  CHECK(lambda_schedule(Regime::Source, 1, s).lambda == doctest::Approx(1.0));

  auto c = base_params();
  c.alpha = std::numeric_limits<double>::infinity();
  const double c0 = schedule_c0(Regime::SourceCapacity, c);
  CHECK(lambda_schedule(Regime::SourceCapacity, 4096, c).lambda == doctest::Approx(std::sqrt(c0 / 4096.0)));

  // clamp to B2*
  auto k = base_params();
  k.B2star = 0.5;
  auto lc = lambda_schedule(Regime::None, 4, k);
  CHECK(lc.clamped);
  CHECK(lc.lambda == 0.5);

  // c0 override replaces the constant
  auto o = base_params();
  o.c0 = 0.01;
  CHECK(lambda_schedule(Regime::Source, 100, o).lambda == doctest::Approx(std::pow(0.01 / 100.0, 1.0 / 3.0)));

  for (auto reg : {Regime::None, Regime::Source, Regime::SourceCapacity}) {
    auto q = base_params();
    q.B2star = 1e12;
    double prev = INFINITY;
    for (long n = 1; n <= (1L << 20); n *= 2) {
      double l = lambda_schedule(reg, n, q).lambda;
      CHECK(l < prev);
      prev = l;
    }
  }
  auto bad = base_params();
  bad.delta = 0.7;
  CHECK_THROWS_WITH_AS(lambda_schedule(Regime::None, 10, bad), "delta must lie in (0, 0.5]", ConfigError);
}

TEST_CASE("theoretical rates") {
  CHECK(theoretical_rate(Regime::None, 0, 0) == 0.5);
  CHECK(theoretical_rate(Regime::Source, 0.5, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(theoretical_rate(Regime::SourceCapacity, 0.5, 4) == doctest::Approx(8.0 / 9.0));
  CHECK(theoretical_rate(Regime::SourceCapacity, 0.5, 2) == doctest::Approx(0.8));
  CHECK(regime_from_name("source_capacity") == Regime::SourceCapacity);
  CHECK_THROWS_AS(regime_from_name("fast"), ConfigError);
}

TEST_CASE("rate constants") {
  auto p = base_params();
  auto c = rate_constants(Regime::None, p);
  CHECK(c.C0 == doctest::Approx(16.0));
  CHECK(c.C1 == doctest::Approx(48.0));
  const double a = p.B2bar / p.B1bar;
  CHECK(c.N >= 36.0 * a * a * std::pow(std::log(6.0 * a * a / p.delta), 2));

  auto s = base_params();
  auto cs = rate_constants(Regime::Source, s);
  CHECK(cs.gamma == doctest::Approx(2.0 / 3.0));
  CHECK(cs.C1 == doctest::Approx(8.0 * std::pow(256.0, 2.0 / 3.0)));
  CHECK(cs.C1 == doctest::Approx(322.54).epsilon(1e-4));
  CHECK(cs.N_available);
  CHECK(cs.lambda0 == doctest::Approx(std::min(1.0, std::pow(2.0 * std::log(20.0), -2.0))));

  auto sq = base_params();
  sq.R = 0;
  CHECK(rate_constants(Regime::Source, sq).lambda0 == 1.0);
  auto r0 = base_params();
  r0.r = 0;
  CHECK_FALSE(rate_constants(Regime::Source, r0).N_available);

  auto sp = make_source_population(16, 0.5, 2.0, 1);
  auto sol = solve_population(sp.pop, {});
  auto rp = regime_params(sp.pop, sol.theta_star, 0.1);
  CHECK(rp.R == 0.0);
  rp.r = 0.5;
  rp.L = sp.L;
  rp.Q = sp.Q;
  rp.alpha = 2;
  CHECK(rate_constants(Regime::SourceCapacity, rp).lambda0 == 1.0);
}

TEST_CASE("plan validation") {
  auto P1 = th::p1();
  ExperimentPlan plan;
  plan.population = &P1;
  plan.n_grid = {8, 16};
  plan.delta = 0.7;
  CHECK_THROWS_WITH_AS(validate_plan(plan), "delta must lie in (0, 0.5]", ConfigError);
  plan.delta = 0.1;
  plan.n_grid = {16, 8};
  CHECK_THROWS_AS(validate_plan(plan), ConfigError);
  plan.n_grid = {8, 16};
  plan.replicates = 0;
  CHECK_THROWS_AS(validate_plan(plan), ConfigError);
  plan.replicates = 1;
  plan.regime = Regime::Source;
  plan.r = 0.8;
  CHECK_THROWS_AS(validate_plan(plan), ConfigError);
  plan.r = 0.5;
  validate_plan(plan);
  plan.lambda_override = {0.1};
  CHECK_THROWS_AS(validate_plan(plan), ConfigError);
}

TEST_CASE("rate experiment plumbing") {
  auto sp = make_source_population(16, 0.5, 2.0, 5);
  ExperimentPlan plan;
  plan.population = &sp.pop;
  plan.regime = Regime::SourceCapacity;
  plan.r = sp.r;
  plan.alpha = sp.alpha;
  plan.L = sp.L;
  plan.Q = sp.Q;
  plan.n_grid = {64};
  plan.replicates = 1;
  plan.seed = 3;
  auto one = run_rate_experiment(plan);
  CHECK(one.cells.size() == 1);
  CHECK(one.rows.size() == 1);

  plan.n_grid = {32, 64, 128, 256};
  plan.replicates = 20;
  plan.jobs = 1;
  auto a = run_rate_experiment(plan);
  plan.jobs = 4;
  auto b = run_rate_experiment(plan);
  REQUIRE(a.cells.size() == 80);
  for (size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].excess_risk == b.cells[i].excess_risk);
    CHECK(a.cells[i].seed == b.cells[i].seed);
    CHECK(a.cells[i].excess_risk >= -1e-12);
  }
  CHECK(a.fitted_exponent == b.fitted_exponent);
  CHECK(std::isfinite(a.fitted_exponent));
  CHECK(a.theoretical_exponent == doctest::Approx(0.8));
  CHECK(a.failures == 0);

  // an explicit lambda per n is used verbatim
  plan.lambda_override = {0.1, 0.05, 0.02, 0.01};
  auto c = run_rate_experiment(plan);
  CHECK(c.rows[2].lambda == 0.02);
  CHECK(c.cells[45].lambda == 0.02);
}

TEST_CASE("excess risk against an independent ridge oracle") {
  auto P1 = th::p1();
  ExperimentPlan plan;
  plan.population = &P1;
  plan.regime = Regime::None;
  plan.n_grid = {10};
  plan.lambda_override = {0.5};
  plan.replicates = 5;
  auto rep = run_rate_experiment(plan);
  for (const auto& cell : rep.cells) {
    // theta_hat = mean(y)/(1 + lambda) with mean(y) in {0, 0.2, ..., 2}; excess = (theta_hat - 1)^2 / 2
    double best = INFINITY;
    for (int twos = 0; twos <= 10; ++twos) {
      double th = (2.0 * twos / 10.0) / 1.5;
      best = std::min(best, std::abs(cell.excess_risk - 0.5 * (th - 1) * (th - 1)));
    }
    CHECK(best <= 1e-12);
  }
}

TEST_CASE("Hessian concentration") {
  auto P2 = th::p2();
  auto sol = solve_population(P2, {});
  auto rec = hessian_concentration_experiment(P2, sol.theta_star, 0.5, 31, 500, 0.1, 1);
  CHECK(rec.premise_ok);
  CHECK(rec.premise_n == doctest::Approx(24.0 * 0.1875 / 0.5 * std::log(8.0 * 0.1875 / (0.5 * 0.1))));
  CHECK(rec.pass());
  CHECK(rec.frequency >= 0.9 - 3 * std::sqrt(0.09 / 500));
  // lambda >= B2: the ratio never exceeds (B2 + lambda) / lambda <= 2
  auto big = hessian_concentration_experiment(P2, sol.theta_star, 0.25, 200, 200, 0.1, 2);
  CHECK(big.frequency == 1.0);
  CHECK(big.worst <= 2.0);
  auto skip = hessian_concentration_experiment(P2, sol.theta_star, 1e-3, 5, 10, 0.1, 2);
  CHECK(skip.skipped);
  CHECK(skip.pass());
}

TEST_CASE("gradient concentration") {
  auto P1 = th::p1();
  auto rec = gradient_concentration_experiment(P1, 0.25, 800, 500, 0.1, 4);
  CHECK(rec.premise_n == doctest::Approx(16.0 * 4.0 * 1.0 / 0.25 * std::log(20.0)));
  CHECK(rec.premise_ok);
  CHECK(rec.pass());
  auto skip = gradient_concentration_experiment(P1, 0.25, 10, 5, 0.1, 4);
  CHECK(skip.skipped);
  CHECK_THROWS_AS(gradient_concentration_experiment(P1, 0.25, 10, 5, 0.1, 4, 3.0), ContractError);
  CHECK(binomial_upper(0.2, 500) == doctest::Approx(0.2 + 3 * std::sqrt(0.16 / 500)));
}
