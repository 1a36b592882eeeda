#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "ewmb/critical_value.hpp"
#include "ewmb/moments.hpp"

namespace ewmb {

// Result of one selection rule applied to a moment table. policy is a grid
// member, or the null policy with fell_back_to_null set when the rule's
// admissible set was empty.
struct RuleOutcome {
  ThresholdPolicy policy;
  double objective = 0.0;  // rule-specific maximized value
  double w_hat = 0.0;
  double b_hat = 0.0;
  std::size_t feasible_set_size = 0;  // policies admitted by the constraint
  std::optional<double> c_alpha_used;
  std::optional<double> lambda_bar_used;
  bool fell_back_to_null = false;
  // critical-value diagnostics (mistake-control only)
  std::optional<double> critval_epsilon;
  std::optional<std::size_t> critval_excluded;
};

// Maximizes w_hat over {g : b_hat(g) <= k}; ties resolve to the
// lexicographically smallest threshold vector; empty set -> null policy.
RuleOutcome sample_analog_rule(const MomentTable& table, double k);

// Simulation settings for the critical value inside mistake_control_rule.
// n_draws below 1000 is rejected (production floor).
struct CritValOptions {
  std::size_t n_draws = 10000;
  std::uint64_t seed = 1;
  double sigma_floor = 1e-12;  // relative, as in CritValRequest
};

// Admits g iff sqrt(n) * (b_hat(g) - k) / sigma_b(g) <= c_alpha; policies
// with degenerate sigma are admitted iff b_hat(g) <= k (the all-zero policy
// stays selectable at k >= 0). Maximizes w_hat over the admitted set.
// If no policy has usable sigma, the critical value is skipped entirely and
// every policy is admitted by the raw comparison.
RuleOutcome mistake_control_rule(const MomentTable& table, double k,
                                 double alpha, const CritValOptions& opts);

struct TradeoffConfig {
  double lambda_bar = 0.0;  // welfare units per currency unit, >= 0
  double k = 0.0;
};

// Maximizes w_hat(g) - lambda_bar * max(b_hat(g) - k, 0) over the whole grid.
RuleOutcome tradeoff_rule(const MomentTable& table, const TradeoffConfig& cfg);

// Vanishing test level: alpha_n = min(base_alpha, 1/log(max(n, 3))).
double alpha_schedule(std::size_t n, double base_alpha);

}  // namespace ewmb
