#include "ewmb/rules.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ewmb/errors.hpp"

namespace ewmb {

namespace {

void check_table(const MomentTable& table) {
  if (table.grid.size() == 0 || table.w_hat.size() != table.grid.size())
    throw ConfigError("rules: empty or inconsistent moment table");
  if (table.n == 0) throw DataError("rules: moment table built from no records");
}

// Index-ordered argmax of `objective` over admitted policies; exact ties
// resolve to the lexicographically smallest threshold vector.
template <typename Admit, typename Objective>
std::optional<std::size_t> grid_argmax(const MomentTable& table, Admit admit,
                                       Objective objective) {
  std::optional<std::size_t> best;
  double best_value = 0.0;
  for (std::size_t i = 0; i < table.grid.size(); ++i) {
    if (!admit(i)) continue;
    const double value = objective(i);
    if (!best || value > best_value ||
        (value == best_value &&
         lex_less(table.grid.policies[i], table.grid.policies[*best]))) {
      best = i;
      best_value = value;
    }
  }
  return best;
}

RuleOutcome null_outcome(const MomentTable& table) {
  RuleOutcome out;
  out.policy = null_policy(table.grid.num_groups());
  out.objective = 0.0;
  out.w_hat = 0.0;
  out.b_hat = 0.0;
  out.fell_back_to_null = true;
  return out;
}

RuleOutcome outcome_at(const MomentTable& table, std::size_t i,
                       double objective) {
  RuleOutcome out;
  out.policy = table.grid.policies[i];
  out.objective = objective;
  out.w_hat = table.w_hat[i];
  out.b_hat = table.b_hat[i];
  return out;
}

}  // namespace

RuleOutcome sample_analog_rule(const MomentTable& table, double k) {
  check_table(table);
  const auto admit = [&](std::size_t i) { return table.b_hat[i] <= k; };
  std::size_t admitted = 0;
  for (std::size_t i = 0; i < table.grid.size(); ++i)
    if (admit(i)) ++admitted;
  const auto best =
      grid_argmax(table, admit, [&](std::size_t i) { return table.w_hat[i]; });
  RuleOutcome out = best ? outcome_at(table, *best, table.w_hat[*best])
                         : null_outcome(table);
  out.feasible_set_size = admitted;
  return out;
}

RuleOutcome mistake_control_rule(const MomentTable& table, double k,
                                 double alpha, const CritValOptions& opts) {
  check_table(table);
  if (!(alpha > 0.0 && alpha <= 0.5))
    throw ConfigError("mistake_control_rule: alpha must lie in (0, 0.5]");
  if (opts.n_draws < 1000)
    throw ConfigError(
        "mistake_control_rule: the critical value needs at least 1000 draws");
  if (!table.has_cov())
    throw ConfigError(
        "mistake_control_rule: moment table lacks the budget covariance");

  // Degenerate-sigma policies cannot be normalized; they are admitted by the
  // raw budget comparison instead (keeps the null policy selectable).
  double sigma_max = 0.0;
  for (const double s : table.sigma_b) sigma_max = std::max(sigma_max, s);
  const double floor_abs = opts.sigma_floor * sigma_max;
  const auto usable = [&](std::size_t i) {
    return table.sigma_b[i] > 0.0 && table.sigma_b[i] >= floor_abs;
  };
  bool any_usable = false;
  for (std::size_t i = 0; i < table.grid.size() && !any_usable; ++i)
    any_usable = usable(i);

  std::optional<CritValResult> cv;
  if (any_usable) {
    CritValRequest req;
    req.cov_b = table.cov_b;
    req.alpha = alpha;
    req.n_draws = opts.n_draws;
    req.seed = opts.seed;
    req.sigma_floor = opts.sigma_floor;
    cv = critical_value(req);
  }

  const double sqrt_n = std::sqrt(static_cast<double>(table.n));
  const auto admit = [&](std::size_t i) {
    if (!usable(i)) return table.b_hat[i] <= k;
    return sqrt_n * (table.b_hat[i] - k) / table.sigma_b[i] <= cv->c_alpha;
  };
  std::size_t admitted = 0;
  for (std::size_t i = 0; i < table.grid.size(); ++i)
    if (admit(i)) ++admitted;
  const auto best =
      grid_argmax(table, admit, [&](std::size_t i) { return table.w_hat[i]; });
  RuleOutcome out = best ? outcome_at(table, *best, table.w_hat[*best])
                         : null_outcome(table);
  out.feasible_set_size = admitted;
  if (cv) {
    out.c_alpha_used = cv->c_alpha;
    out.critval_epsilon = cv->epsilon;
    out.critval_excluded = cv->n_excluded;
  }
  return out;
}

RuleOutcome tradeoff_rule(const MomentTable& table, const TradeoffConfig& cfg) {
  check_table(table);
  if (!(cfg.lambda_bar >= 0.0) || !std::isfinite(cfg.lambda_bar))
    throw ConfigError("tradeoff_rule: lambda_bar must be finite and >= 0");
  const auto objective = [&](std::size_t i) {
    return table.w_hat[i] -
           cfg.lambda_bar * std::max(table.b_hat[i] - cfg.k, 0.0);
  };
  const auto best = grid_argmax(
      table, [](std::size_t) { return true; }, objective);
  RuleOutcome out = outcome_at(table, *best, objective(*best));
  out.feasible_set_size = table.grid.size();
  out.lambda_bar_used = cfg.lambda_bar;
  return out;
}

double alpha_schedule(std::size_t n, double base_alpha) {
  if (n == 0) throw ConfigError("alpha_schedule: n must be >= 1");
  if (!(base_alpha > 0.0 && base_alpha <= 0.5))
    throw ConfigError("alpha_schedule: base_alpha must lie in (0, 0.5]");
  const double n_eff = static_cast<double>(std::max<std::size_t>(n, 3));
  return std::min(base_alpha, 1.0 / std::log(n_eff));
}

}  // namespace ewmb
