#include "ewmb/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>

#include "ewmb/errors.hpp"
#include "ewmb/moments.hpp"
#include "ewmb/rng.hpp"

namespace ewmb {

namespace {

// Counter tags for per-record variates.
enum Field : std::uint64_t {
  kTreat = 0,
  kIncome = 1,
  kGroup = 2,
  kBenefit = 3,
  kCost = 4,
};

double uniform_cdf(double t, double lo, double hi) {
  return std::clamp((t - lo) / (hi - lo), 0.0, 1.0);
}

}  // namespace

std::size_t DgpSpec::num_groups() const {
  return kind == Kind::prop1 ? 1 : groups.size();
}

DgpSpec calibrated_mixture() {
  DgpSpec dgp;
  dgp.kind = DgpSpec::Kind::calibrated_mixture;
  dgp.propensity = 0.5;
  dgp.groups = {
      {0.568, 0.031, 0.5, 651.0, 2000.0, 0.0, 500.0},
      {0.171, 0.103, 0.5, 348.0, 2000.0, 0.0, 500.0},
      {0.261, 0.015, 0.5, -275.0, 2000.0, 0.0, 500.0},
  };
  return dgp;
}

DgpSpec prop1_dgp(double t_low, double t_high, double q, double propensity) {
  DgpSpec dgp;
  dgp.kind = DgpSpec::Kind::prop1;
  dgp.prop1 = {t_low, t_high, q};
  dgp.propensity = propensity;
  return dgp;
}

void validate(const DgpSpec& dgp) {
  if (!(dgp.propensity > 0.0 && dgp.propensity < 1.0))
    throw ConfigError("dgp: propensity must lie in (0, 1)");
  if (dgp.kind == DgpSpec::Kind::prop1) {
    const Prop1Spec& p = dgp.prop1;
    if (!(0.0 < p.t_low && p.t_low < p.t_high && p.t_high < 1.0))
      throw ConfigError("dgp: prop1 requires 0 < t_low < t_high < 1");
    if (!(p.q > 0.0 && p.q < 1.0))
      throw ConfigError("dgp: prop1 requires q in (0, 1)");
    return;
  }
  if (dgp.groups.empty()) throw ConfigError("dgp: mixture needs >= 1 group");
  double total = 0.0;
  for (std::size_t g = 0; g < dgp.groups.size(); ++g) {
    const MixtureGroup& mg = dgp.groups[g];
    const std::string where = "dgp: group " + std::to_string(g) + ": ";
    if (!(mg.weight > 0.0)) throw ConfigError(where + "weight must be > 0");
    if (!(mg.benefit_sd >= 0.0) || !(mg.cost_sd >= 0.0))
      throw ConfigError(where + "standard deviations must be >= 0");
    if (!(mg.income_hi > mg.income_lo) || mg.income_lo < 0.0)
      throw ConfigError(where + "income range must satisfy 0 <= lo < hi");
    total += mg.weight;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw ConfigError("dgp: mixture weights must sum to 1 (got " +
                      std::to_string(total) + ")");
}

PopMoments population_moments(const DgpSpec& dgp,
                              const ThresholdPolicy& policy) {
  validate(dgp);
  if (policy.thresholds.size() != dgp.num_groups())
    throw ConfigError("population_moments: policy has " +
                      std::to_string(policy.thresholds.size()) +
                      " groups, dgp has " + std::to_string(dgp.num_groups()));
  PopMoments pm;
  if (dgp.kind == DgpSpec::Kind::prop1) {
    const Prop1Spec& p = dgp.prop1;
    const double t = std::clamp(policy.thresholds[0], 0.0, 1.0);
    pm.w = t;
    pm.b = p.q * std::min(t, p.t_low) + p.q * std::max(t - p.t_high, 0.0);
    return pm;
  }
  for (std::size_t g = 0; g < dgp.groups.size(); ++g) {
    const MixtureGroup& mg = dgp.groups[g];
    const double f = uniform_cdf(policy.thresholds[g], mg.income_lo,
                                 mg.income_hi);
    pm.w += mg.weight * mg.benefit_mean * f;
    pm.b += mg.weight * mg.cost_mean * f;
  }
  return pm;
}

OracleOptimum constrained_optimum(const DgpSpec& dgp, const PolicyGrid& grid,
                                  double k) {
  if (grid.size() == 0) throw ConfigError("constrained_optimum: empty grid");
  std::optional<std::size_t> best;
  PopMoments best_pm;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const PopMoments pm = population_moments(dgp, grid.policies[i]);
    if (pm.b > k) continue;
    if (!best || pm.w > best_pm.w ||
        (pm.w == best_pm.w && lex_less(grid.policies[i], grid.policies[*best]))) {
      best = i;
      best_pm = pm;
    }
  }
  OracleOptimum out;
  if (!best) {
    out.policy = null_policy(grid.num_groups());
    out.fell_back_to_null = true;
    return out;
  }
  out.policy = grid.policies[*best];
  out.w = best_pm.w;
  out.b = best_pm.b;
  out.value = best_pm.w;
  return out;
}

OracleOptimum tradeoff_optimum(const DgpSpec& dgp, const PolicyGrid& grid,
                               double k, double lambda_bar) {
  if (grid.size() == 0) throw ConfigError("tradeoff_optimum: empty grid");
  if (!(lambda_bar >= 0.0) || !std::isfinite(lambda_bar))
    throw ConfigError("tradeoff_optimum: lambda_bar must be finite and >= 0");
  std::optional<std::size_t> best;
  PopMoments best_pm;
  double best_value = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const PopMoments pm = population_moments(dgp, grid.policies[i]);
    const double value = pm.w - lambda_bar * std::max(pm.b - k, 0.0);
    if (!best || value > best_value ||
        (value == best_value &&
         lex_less(grid.policies[i], grid.policies[*best]))) {
      best = i;
      best_pm = pm;
      best_value = value;
    }
  }
  OracleOptimum out;
  out.policy = grid.policies[*best];
  out.w = best_pm.w;
  out.b = best_pm.b;
  out.value = best_value;

  // Penalized optimum dominates the constrained optimum whenever the grid
  // has a feasible policy: the penalty vanishes on the feasible set.
  const OracleOptimum co = constrained_optimum(dgp, grid, k);
  if (!co.fell_back_to_null && out.value < co.w)
    throw NumericError("tradeoff_optimum: dominance check failed (internal)");
  return out;
}

std::vector<RawRecord> draw_sample(const DgpSpec& dgp, std::size_t n,
                                   std::uint64_t seed) {
  validate(dgp);
  if (n == 0) throw ConfigError("draw_sample: n must be >= 1");
  std::vector<RawRecord> out(n);

  std::vector<double> cum;
  if (dgp.kind != DgpSpec::Kind::prop1) {
    cum.reserve(dgp.groups.size());
    double acc = 0.0;
    for (const MixtureGroup& mg : dgp.groups) {
      acc += mg.weight;
      cum.push_back(acc);
    }
    cum.back() = 1.0;  // guard against rounding at the top end
  }

  for (std::size_t i = 0; i < n; ++i) {
    RawRecord& r = out[i];
    const int d = rng::u01(seed, i, kTreat) < dgp.propensity ? 1 : 0;
    r.d = d;
    r.m = 0;
    if (dgp.kind == DgpSpec::Kind::prop1) {
      const Prop1Spec& p = dgp.prop1;
      const double x = rng::u01(seed, i, kIncome);
      const bool segment_free = x >= p.t_low && x <= p.t_high;
      const double cost =
          segment_free ? 0.0 : (rng::u01(seed, i, kCost) < p.q ? 1.0 : 0.0);
      r.x.income = x;
      r.x.group = 0;
      r.v = 0;
      r.y = d == 1 ? 1.0 : 0.0;  // benefit identically 1, y0 = 0
      r.c = d == 1 ? cost : 0.0;
    } else {
      const double ug = rng::u01(seed, i, kGroup);
      std::size_t g = 0;
      while (g + 1 < cum.size() && ug > cum[g]) ++g;
      const MixtureGroup& mg = dgp.groups[g];
      const double income =
          mg.income_lo +
          rng::u01(seed, i, kIncome) * (mg.income_hi - mg.income_lo);
      const double benefit =
          mg.benefit_mean + mg.benefit_sd * rng::normal(seed, i, kBenefit);
      const double cost =
          mg.cost_mean + mg.cost_sd * rng::normal(seed, i, kCost);
      r.x.income = income;
      r.x.group = static_cast<int>(g);
      r.v = static_cast<int>(g);
      r.y = d == 1 ? benefit : 0.0;
      r.c = d == 1 ? cost : 0.0;
    }
  }
  return out;
}

namespace {

RuleOutcome apply_rule(const RuleSpec& spec, const MomentTable& table,
                       const McConfig& cfg, std::uint64_t critval_seed,
                       const std::vector<ScoredRecord>& scores) {
  switch (spec.kind) {
    case RuleSpec::Kind::sample_analog:
      return sample_analog_rule(table, cfg.k);
    case RuleSpec::Kind::mistake_control: {
      CritValOptions opts;
      opts.n_draws = spec.critval_draws;
      opts.seed = critval_seed;
      opts.sigma_floor = spec.sigma_floor;
      return mistake_control_rule(table, cfg.k, spec.alpha, opts);
    }
    case RuleSpec::Kind::tradeoff:
      return tradeoff_rule(table, TradeoffConfig{spec.lambda_bar, cfg.k});
    case RuleSpec::Kind::fixed_policy: {
      RuleOutcome out;
      out.policy = spec.fixed;
      out.w_hat = welfare_hat(scores, spec.fixed);
      out.b_hat = budget_hat(scores, spec.fixed);
      out.objective = out.w_hat;
      out.feasible_set_size = 1;
      return out;
    }
  }
  throw ConfigError("run_monte_carlo: unknown rule kind");
}

enum class ErrKind { none, config, data, numeric };

}  // namespace

MonteCarloReport run_monte_carlo(const DgpSpec& dgp, const PolicyGrid& grid,
                                 const std::vector<RuleSpec>& rules,
                                 const McConfig& cfg) {
  validate(dgp);
  if (grid.size() == 0) throw ConfigError("run_monte_carlo: empty grid");
  if (grid.num_groups() != dgp.num_groups())
    throw ConfigError("run_monte_carlo: grid group count does not match dgp");
  if (rules.empty()) throw ConfigError("run_monte_carlo: no rules configured");
  if (cfg.iters == 0) throw ConfigError("run_monte_carlo: iters must be >= 1");
  if (cfg.n == 0) throw ConfigError("run_monte_carlo: n must be >= 1");

  const OracleOptimum star = constrained_optimum(dgp, grid, cfg.k);
  const double eps_w =
      cfg.eps_w_abs ? *cfg.eps_w_abs : cfg.eps_w_rel * std::abs(star.w);

  bool needs_cov = false;
  for (const RuleSpec& r : rules)
    needs_cov = needs_cov || r.kind == RuleSpec::Kind::mistake_control;

  std::map<int, double> propensity;
  for (std::size_t g = 0; g < dgp.num_groups(); ++g)
    propensity[static_cast<int>(g)] = dgp.propensity;

  const std::size_t n_rules = rules.size();
  std::vector<IterationRow> rows(cfg.iters * n_rules);

  std::atomic<bool> failed{false};
  ErrKind err_kind = ErrKind::none;
  std::string err_msg;

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t it = 0; it < static_cast<std::int64_t>(cfg.iters); ++it) {
    if (failed.load(std::memory_order_relaxed)) continue;
    const auto iter = static_cast<std::size_t>(it);
    const std::uint64_t seed_it = rng::derive(cfg.master_seed, iter);
    try {
      const std::vector<RawRecord> records = draw_sample(dgp, cfg.n, seed_it);
      const std::vector<ScoredRecord> scores =
          cfg.mode == ScoreMode::ipw
              ? ipw_scores(records, propensity, cfg.kappa, cfg.kappa_clip)
              : aipw_scores(records, cfg.kappa, cfg.kappa_clip);
      const MomentTable table = moment_table(
          scores, grid, needs_cov ? CovMode::full : CovMode::diagonal_only);
      for (std::size_t r = 0; r < n_rules; ++r) {
        const RuleOutcome outcome = apply_rule(
            rules[r], table, cfg, rng::derive(seed_it, 101 + r), scores);
        const PopMoments pm = population_moments(dgp, outcome.policy);
        IterationRow& row = rows[iter * n_rules + r];
        row.iter = iter;
        row.rule = r;
        row.policy = outcome.policy;
        row.w_pop = pm.w;
        row.b_pop = pm.b;
        row.feasible = !(pm.b > cfg.k);
        row.fell_back = outcome.fell_back_to_null;
      }
    } catch (const std::exception& e) {
      bool expected = false;
      if (failed.compare_exchange_strong(expected, true)) {
#pragma omp critical(ewmb_mc_error)
        {
          err_msg = "Monte Carlo iteration " + std::to_string(iter) +
                    " (seed " + std::to_string(seed_it) + "): " + e.what();
          if (dynamic_cast<const ConfigError*>(&e))
            err_kind = ErrKind::config;
          else if (dynamic_cast<const DataError*>(&e))
            err_kind = ErrKind::data;
          else
            err_kind = ErrKind::numeric;
        }
      }
    }
  }

  if (failed.load()) {
    switch (err_kind) {
      case ErrKind::config: throw ConfigError(err_msg);
      case ErrKind::data: throw DataError(err_msg);
      default: throw NumericError(err_msg);
    }
  }

  MonteCarloReport rep;
  rep.n = cfg.n;
  rep.iters = cfg.iters;
  rep.master_seed = cfg.master_seed;
  rep.k = cfg.k;
  rep.eps_w_used = eps_w;
  rep.g_star = star.policy;
  rep.w_star = star.w;
  rep.b_star = star.b;
  rep.rules.resize(n_rules);

  const double denom = static_cast<double>(cfg.iters);
  for (std::size_t r = 0; r < n_rules; ++r) {
    RuleMetrics& m = rep.rules[r];
    m.name = rules[r].name;
    m.welfare_loss_absolute = !(star.w > 0.0);
    std::size_t strict = 0, weak = 0, subopt = 0, fell = 0;
    double cost_sum = 0.0, loss_sum = 0.0;
    for (std::size_t it = 0; it < cfg.iters; ++it) {
      const IterationRow& row = rows[it * n_rules + r];
      if (row.b_pop > cfg.k) ++strict;
      if (row.b_pop >= cfg.k) ++weak;
      if (row.w_pop < star.w - eps_w) ++subopt;
      if (row.fell_back) ++fell;
      cost_sum += row.b_pop;
      loss_sum += m.welfare_loss_absolute
                      ? star.w - row.w_pop
                      : (star.w - row.w_pop) / star.w;
    }
    m.prob_infeasible = static_cast<double>(strict) / denom;
    m.prob_infeasible_weak = static_cast<double>(weak) / denom;
    m.prob_suboptimal = static_cast<double>(subopt) / denom;
    m.null_fallback_share = static_cast<double>(fell) / denom;
    m.avg_cost = cost_sum / denom;
    m.avg_welfare_loss = loss_sum / denom;
  }

  if (cfg.keep_iteration_rows) rep.rows = std::move(rows);
  return rep;
}

}  // namespace ewmb
