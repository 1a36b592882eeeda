#include "doctest.h"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "ewmb/errors.hpp"
#include "ewmb/moments.hpp"
#include "ewmb/rng.hpp"
#include "ewmb/scoring.hpp"
#include "ewmb/simlab.hpp"

using namespace ewmb;

namespace {

PolicyGrid single_group_grid(std::vector<double> cutoffs) {
  return enumerate_grid({{std::move(cutoffs)}, false});
}

DgpSpec one_group_mixture(double benefit_mean, double cost_mean,
                          double benefit_sd = 0.5, double cost_sd = 10.0) {
  DgpSpec dgp;
  dgp.kind = DgpSpec::Kind::calibrated_mixture;
  MixtureGroup g;
  g.weight = 1.0;
  g.benefit_mean = benefit_mean;
  g.benefit_sd = benefit_sd;
  g.cost_mean = cost_mean;
  g.cost_sd = cost_sd;
  dgp.groups = {g};
  return dgp;
}

bool same_records(const std::vector<RawRecord>& a,
                  const std::vector<RawRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].y != b[i].y || a[i].c != b[i].c || a[i].m != b[i].m ||
        a[i].d != b[i].d || a[i].v != b[i].v ||
        a[i].x.income != b[i].x.income || a[i].x.group != b[i].x.group)
      return false;
  return true;
}

}  // namespace

TEST_CASE("stock generators validate and expose their group counts") {
  const auto mix = calibrated_mixture();
  CHECK_NOTHROW(validate(mix));
  CHECK(mix.num_groups() == 3);
  double total = 0.0;
  for (const auto& g : mix.groups) total += g.weight;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  const auto p1 = prop1_dgp();
  CHECK_NOTHROW(validate(p1));
  CHECK(p1.num_groups() == 1);
  CHECK(p1.prop1.t_low == 0.4);
  CHECK(p1.prop1.t_high == 0.6);
  CHECK(p1.prop1.q == 0.5);
}

TEST_CASE("dgp validation rejects broken specifications") {
  auto dgp = prop1_dgp();
  dgp.propensity = 0.0;
  CHECK_THROWS_AS(validate(dgp), ConfigError);
  dgp.propensity = 1.0;
  CHECK_THROWS_AS(validate(dgp), ConfigError);
  CHECK_THROWS_AS(validate(prop1_dgp(0.6, 0.4)), ConfigError);
  CHECK_THROWS_AS(validate(prop1_dgp(0.0, 0.6)), ConfigError);
  CHECK_THROWS_AS(validate(prop1_dgp(0.4, 1.0)), ConfigError);
  CHECK_THROWS_AS(validate(prop1_dgp(0.4, 0.6, 0.0)), ConfigError);
  CHECK_THROWS_AS(validate(prop1_dgp(0.4, 0.6, 1.0)), ConfigError);

  auto mix = calibrated_mixture();
  mix.groups[0].weight += 0.1;
  CHECK_THROWS_AS(validate(mix), ConfigError);
  mix = calibrated_mixture();
  mix.groups[1].benefit_sd = -0.5;
  CHECK_THROWS_AS(validate(mix), ConfigError);
  mix = calibrated_mixture();
  mix.groups[2].income_hi = mix.groups[2].income_lo;
  CHECK_THROWS_AS(validate(mix), ConfigError);
  mix = calibrated_mixture();
  mix.groups.clear();
  CHECK_THROWS_AS(validate(mix), ConfigError);
}

TEST_CASE("segment population welfare and budget have closed forms") {
  const auto dgp = prop1_dgp();  // t_low 0.4, t_high 0.6, q 0.5
  const auto at = [&](double t) {
    return population_moments(dgp, ThresholdPolicy{{t}});
  };
  CHECK(at(0.0).w == 0.0);
  CHECK(at(0.0).b == 0.0);
  CHECK(at(0.3).w == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(at(0.3).b == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(at(0.4).b == doctest::Approx(0.2).epsilon(1e-15));
  // the free segment: welfare keeps rising, budget is flat
  CHECK(at(0.5).w == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(at(0.5).b == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(at(0.6).b == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(at(0.8).b == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(at(1.0).w == 1.0);
  CHECK(at(1.0).b == doctest::Approx(0.4).epsilon(1e-15));
  // thresholds beyond the income support saturate
  CHECK(at(2.0).w == 1.0);
  CHECK(at(2.0).b == at(1.0).b);

  const auto skew = prop1_dgp(0.2, 0.7, 0.25);
  CHECK(population_moments(skew, ThresholdPolicy{{0.5}}).b ==
        doctest::Approx(0.05).epsilon(1e-15));
  CHECK_THROWS_AS(population_moments(dgp, ThresholdPolicy{{0.5, 0.5}}),
                  ConfigError);
}

TEST_CASE("mixture population moments scale with the covered income share") {
  const auto dgp = one_group_mixture(2.0, 100.0);
  const auto at = [&](double t) {
    return population_moments(dgp, ThresholdPolicy{{t}});
  };
  CHECK(at(250.0).w == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(at(250.0).b == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(at(0.0).w == 0.0);
  CHECK(at(500.0).w == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(at(700.0).b == doctest::Approx(100.0).epsilon(1e-12));

  DgpSpec two;
  two.kind = DgpSpec::Kind::calibrated_mixture;
  two.groups = {{0.3, 1.0, 0.5, 60.0, 10.0, 0.0, 100.0},
                {0.7, -2.0, 0.5, -40.0, 10.0, 0.0, 200.0}};
  const auto pm = population_moments(two, ThresholdPolicy{{50.0, 100.0}});
  CHECK(pm.w == doctest::Approx(0.3 * 1.0 * 0.5 + 0.7 * -2.0 * 0.5).epsilon(1e-12));
  CHECK(pm.b == doctest::Approx(0.3 * 60.0 * 0.5 + 0.7 * -40.0 * 0.5).epsilon(1e-12));

  // a custom table shares the mixture moment formulas
  DgpSpec custom = two;
  custom.kind = DgpSpec::Kind::custom_table;
  const auto pm2 = population_moments(custom, ThresholdPolicy{{50.0, 100.0}});
  CHECK(pm2.w == pm.w);
  CHECK(pm2.b == pm.b);
}

TEST_CASE("constrained optimum walks the budget frontier") {
  const auto dgp = prop1_dgp();
  const auto grid = single_group_grid({0.0, 0.2, 0.45, 0.6, 1.0});
  const auto best = constrained_optimum(dgp, grid, 0.2);
  CHECK(best.policy.thresholds == std::vector<double>{0.6});
  CHECK(best.w == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(best.b == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(best.value == best.w);
  CHECK_FALSE(best.fell_back_to_null);

  // only the do-nothing policy fits a tiny budget
  const auto tiny = constrained_optimum(dgp, grid, 0.05);
  CHECK(tiny.policy.thresholds == std::vector<double>{0.0});
  CHECK(tiny.w == 0.0);
  CHECK_FALSE(tiny.fell_back_to_null);

  const auto none = constrained_optimum(dgp, grid, -1.0);
  CHECK(none.fell_back_to_null);
  CHECK(none.value == 0.0);
  CHECK(none.policy.thresholds == std::vector<double>{0.0});
}

TEST_CASE("tradeoff optimum prices overshoot and honors ties") {
  const auto dgp = prop1_dgp();
  const auto grid = single_group_grid({0.0, 0.5, 1.0});
  // B(0.5) = 0.2 (no overshoot past k), B(1.0) = 0.4
  const auto cheap = tradeoff_optimum(dgp, grid, 0.2, 2.0);
  CHECK(cheap.policy.thresholds == std::vector<double>{1.0});
  CHECK(cheap.value == doctest::Approx(1.0 - 2.0 * 0.2).epsilon(1e-12));
  const auto dear = tradeoff_optimum(dgp, grid, 0.2, 3.0);
  CHECK(dear.policy.thresholds == std::vector<double>{0.5});
  CHECK(dear.value == doctest::Approx(0.5).epsilon(1e-12));
  // exact tie at lambda = 2.5: both score 0.5, the smaller threshold wins
  const auto tie = tradeoff_optimum(dgp, grid, 0.2, 2.5);
  CHECK(tie.policy.thresholds == std::vector<double>{0.5});

  CHECK_THROWS_AS(tradeoff_optimum(dgp, grid, 0.2, -1.0), ConfigError);
}

TEST_CASE("the penalized population optimum dominates the constrained one") {
  for (std::uint64_t s = 1; s <= 50; ++s) {
    const double t_low = 0.1 + 0.3 * rng::u01(s, 0, 0);
    const double t_high = t_low + 0.1 + 0.25 * rng::u01(s, 0, 1);
    const double q = 0.1 + 0.8 * rng::u01(s, 0, 2);
    const auto dgp = prop1_dgp(t_low, t_high, q);
    std::vector<double> cutoffs = {0.0};
    for (int j = 0; j < 6; ++j) cutoffs.push_back(rng::u01(s, 1, j));
    std::sort(cutoffs.begin(), cutoffs.end());
    cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
    const auto grid = single_group_grid(cutoffs);
    const double k = 0.3 * rng::u01(s, 0, 3);
    const double lambda = 10.0 * rng::u01(s, 0, 4);
    const auto co = constrained_optimum(dgp, grid, k);
    const auto to = tradeoff_optimum(dgp, grid, k, lambda);
    CHECK(to.value >= co.w);  // the rule itself re-checks this internally
  }
}

TEST_CASE("samples are deterministic in the seed and obey arm invariants") {
  const auto dgp = prop1_dgp();
  const auto a = draw_sample(dgp, 512, 9);
  const auto b = draw_sample(dgp, 512, 9);
  CHECK(same_records(a, b));
  const auto c = draw_sample(dgp, 512, 10);
  CHECK_FALSE(same_records(a, c));

  for (const auto& r : a) {
    CHECK(r.m == 0);
    CHECK((r.d == 0 || r.d == 1));
    if (r.d == 0) CHECK(r.c == 0.0);
    CHECK(r.v == 0);
    CHECK(r.x.group == 0);
    CHECK(r.x.income > 0.0);
    CHECK(r.x.income < 1.0);
    CHECK(r.y == (r.d == 1 ? 1.0 : 0.0));  // unit benefit population
  }
  CHECK_THROWS_AS(draw_sample(dgp, 0, 1), ConfigError);
}

TEST_CASE("treated share tracks the assignment probability") {
  auto dgp = prop1_dgp();
  dgp.propensity = 0.3;
  const auto sample = draw_sample(dgp, 20000, 11);
  double share = 0.0;
  for (const auto& r : sample) share += r.d;
  share /= sample.size();
  CHECK(std::abs(share - 0.3) < 3.0 * std::sqrt(0.3 * 0.7 / 20000.0));
}

TEST_CASE("mixture samples land in the declared groups and ranges") {
  const auto dgp = calibrated_mixture();
  const auto sample = draw_sample(dgp, 30000, 5);
  std::vector<double> counts(3, 0.0);
  for (const auto& r : sample) {
    REQUIRE(r.x.group >= 0);
    REQUIRE(r.x.group < 3);
    CHECK(r.v == r.x.group);
    const auto& g = dgp.groups[r.x.group];
    CHECK(r.x.income >= g.income_lo);
    CHECK(r.x.income <= g.income_hi);
    counts[r.x.group] += 1.0;
  }
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::abs(counts[j] / 30000.0 - dgp.groups[j].weight) < 0.015);
}

TEST_CASE("sampled mixture means match the component laws") {
  const auto dgp = one_group_mixture(2.0, 100.0, 0.5, 10.0);
  const auto sample = draw_sample(dgp, 40000, 21);
  double sum_y = 0.0, sum_c = 0.0, treated = 0.0;
  for (const auto& r : sample)
    if (r.d == 1) {
      sum_y += r.y;
      sum_c += r.c;
      treated += 1.0;
    }
  CHECK(treated > 15000);
  CHECK(std::abs(sum_y / treated - 2.0) < 3.0 * 0.5 / std::sqrt(treated));
  CHECK(std::abs(sum_c / treated - 100.0) < 3.0 * 10.0 / std::sqrt(treated));
}

TEST_CASE("scored segment samples reproduce the population curves") {
  const auto dgp = prop1_dgp();
  const auto sample = draw_sample(dgp, 40000, 31);
  const auto scores =
      ipw_scores(sample, {{0, dgp.propensity}}, 0.0, kDefaultKappaClip);
  const auto grid = single_group_grid({0.2, 0.45, 0.7, 1.0});
  const auto table = moment_table(scores, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto pm = population_moments(dgp, grid.policies[i]);
    CHECK(table.w_hat[i] == doctest::Approx(pm.w).epsilon(0.05));
    CHECK(std::abs(table.b_hat[i] - pm.b) < 0.02);
  }
}

TEST_CASE("a fixed-policy rule turns the study into a fixed point") {
  const auto dgp = prop1_dgp();
  const auto grid = single_group_grid({0.0, 0.5, 0.6});
  RuleSpec fixed;
  fixed.kind = RuleSpec::Kind::fixed_policy;
  fixed.name = "hold";
  fixed.fixed = ThresholdPolicy{{0.5}};
  McConfig cfg;
  cfg.n = 200;
  cfg.iters = 10;
  cfg.master_seed = 3;
  cfg.k = 0.2;
  const auto report = run_monte_carlo(dgp, grid, {fixed}, cfg);

  // oracle: t = 0.6 exhausts the budget exactly
  CHECK(report.g_star.thresholds == std::vector<double>{0.6});
  CHECK(report.w_star == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(report.eps_w_used == doctest::Approx(1e-9 * 0.6).epsilon(1e-12));

  REQUIRE(report.rules.size() == 1);
  const auto& m = report.rules[0];
  CHECK(m.name == "hold");
  CHECK(m.prob_infeasible == 0.0);       // B = 0.2 is never strictly above k
  CHECK(m.prob_infeasible_weak == 1.0);  // but always exactly at it
  CHECK(m.prob_suboptimal == 1.0);       // 0.5 < 0.6 - eps
  CHECK(m.avg_welfare_loss == doctest::Approx((0.6 - 0.5) / 0.6).epsilon(1e-12));
  CHECK_FALSE(m.welfare_loss_absolute);
  CHECK(m.avg_cost == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(m.null_fallback_share == 0.0);

  REQUIRE(report.rows.size() == 10);
  for (const auto& row : report.rows) {
    CHECK(row.rule == 0);
    CHECK(row.policy.thresholds == std::vector<double>{0.5});
    CHECK(row.w_pop == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(row.feasible);
    CHECK_FALSE(row.fell_back);
  }
}

TEST_CASE("a zero budget makes the welfare loss absolute") {
  const auto dgp = prop1_dgp();
  const auto grid = single_group_grid({0.0, 0.5});
  RuleSpec sa;
  sa.kind = RuleSpec::Kind::sample_analog;
  sa.name = "plugin";
  McConfig cfg;
  cfg.n = 300;
  cfg.iters = 5;
  cfg.k = 0.0;
  const auto report = run_monte_carlo(dgp, grid, {sa}, cfg);
  CHECK(report.w_star == 0.0);
  CHECK(report.rules[0].welfare_loss_absolute);
}

TEST_CASE("monte carlo runs are identical for any thread count") {
  const auto dgp = prop1_dgp();
  const auto grid = single_group_grid({0.0, 0.25, 0.5, 0.75, 1.0});
  std::vector<RuleSpec> rules(3);
  rules[0].kind = RuleSpec::Kind::sample_analog;
  rules[0].name = "plugin";
  rules[1].kind = RuleSpec::Kind::mistake_control;
  rules[1].name = "guarded";
  rules[1].alpha = 0.05;
  rules[1].critval_draws = 1000;
  rules[2].kind = RuleSpec::Kind::tradeoff;
  rules[2].name = "priced";
  rules[2].lambda_bar = 4.0;
  McConfig cfg;
  cfg.n = 400;
  cfg.iters = 16;
  cfg.master_seed = 77;
  cfg.k = 0.2;

  const int hw = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto serial = run_monte_carlo(dgp, grid, rules, cfg);
  omp_set_num_threads(std::max(hw, 4));
  const auto parallel = run_monte_carlo(dgp, grid, rules, cfg);
  omp_set_num_threads(hw);

  REQUIRE(serial.rules.size() == parallel.rules.size());
  for (std::size_t r = 0; r < serial.rules.size(); ++r) {
    CHECK(serial.rules[r].prob_infeasible == parallel.rules[r].prob_infeasible);
    CHECK(serial.rules[r].prob_suboptimal == parallel.rules[r].prob_suboptimal);
    CHECK(serial.rules[r].avg_welfare_loss == parallel.rules[r].avg_welfare_loss);
    CHECK(serial.rules[r].avg_cost == parallel.rules[r].avg_cost);
    CHECK(serial.rules[r].null_fallback_share ==
          parallel.rules[r].null_fallback_share);
  }
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].policy.thresholds == parallel.rows[i].policy.thresholds);
    CHECK(serial.rows[i].w_pop == parallel.rows[i].w_pop);
    CHECK(serial.rows[i].b_pop == parallel.rows[i].b_pop);
  }
}

TEST_CASE("iteration failures carry the iteration index and seed") {
  auto dgp = prop1_dgp();
  dgp.propensity = 0.005;  // valid probability, but outside the overlap window
  const auto grid = single_group_grid({0.0, 0.5});
  RuleSpec sa;
  sa.kind = RuleSpec::Kind::sample_analog;
  sa.name = "plugin";
  McConfig cfg;
  cfg.n = 50;
  cfg.iters = 3;
  CHECK_THROWS_WITH_AS(run_monte_carlo(dgp, grid, {sa}, cfg),
                       doctest::Contains("Monte Carlo iteration"), NumericError);
}

TEST_CASE("monte carlo rejects inconsistent configurations") {
  const auto dgp = prop1_dgp();
  const auto grid = single_group_grid({0.0, 0.5});
  RuleSpec sa;
  sa.kind = RuleSpec::Kind::sample_analog;
  McConfig cfg;
  cfg.n = 10;
  cfg.iters = 1;
  CHECK_THROWS_AS(run_monte_carlo(dgp, PolicyGrid{}, {sa}, cfg), ConfigError);
  CHECK_THROWS_AS(run_monte_carlo(dgp, grid, {}, cfg), ConfigError);
  McConfig zero_iters = cfg;
  zero_iters.iters = 0;
  CHECK_THROWS_AS(run_monte_carlo(dgp, grid, {sa}, zero_iters), ConfigError);
  McConfig zero_n = cfg;
  zero_n.n = 0;
  CHECK_THROWS_AS(run_monte_carlo(dgp, grid, {sa}, zero_n), ConfigError);
  const auto mix_grid = enumerate_grid({{{0.0, 1.0}, {0.0, 1.0}}, false});
  CHECK_THROWS_AS(run_monte_carlo(dgp, mix_grid, {sa}, cfg), ConfigError);
}

TEST_CASE("guarded selection stays feasible and near-optimal at scale") {
  // Budget k = 0.25 cuts the frontier at t = 0.7; the best grid point is
  // t = 0.64 with slack 0.03, the next one overshoots by 0.01.
  const auto dgp = prop1_dgp();
  std::vector<double> cutoffs;
  for (int i = 0; i <= 12; ++i) cutoffs.push_back(0.08 * i);
  const auto grid = single_group_grid(cutoffs);

  std::vector<RuleSpec> rules(2);
  rules[0].kind = RuleSpec::Kind::mistake_control;
  rules[0].name = "guarded";
  rules[0].alpha = alpha_schedule(16000, 0.05);
  rules[0].critval_draws = 2000;
  rules[1].kind = RuleSpec::Kind::sample_analog;
  rules[1].name = "plugin";

  McConfig cfg;
  cfg.n = 16000;
  cfg.iters = 150;
  cfg.master_seed = 2026;
  cfg.k = 0.25;
  cfg.eps_w_abs = 0.02;
  cfg.keep_iteration_rows = false;
  const auto report = run_monte_carlo(dgp, grid, rules, cfg);

  CHECK(report.g_star.thresholds == std::vector<double>{0.64});
  CHECK(report.w_star == doctest::Approx(0.64).epsilon(1e-12));

  const auto& guarded = report.rules[0];
  const auto& plugin = report.rules[1];
  CHECK(guarded.prob_infeasible <= 0.02);
  CHECK(guarded.prob_suboptimal < 0.10);
  CHECK(guarded.null_fallback_share == 0.0);
  // the cutoff is negative, so the guarded pick never exceeds the plugin's
  CHECK(guarded.prob_infeasible <= plugin.prob_infeasible);
  CHECK(guarded.avg_cost <= plugin.avg_cost);
  CHECK(report.rows.empty());
}
