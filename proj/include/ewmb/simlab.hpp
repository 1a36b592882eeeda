#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ewmb/policy.hpp"
#include "ewmb/rules.hpp"
#include "ewmb/scoring.hpp"

namespace ewmb {

// Single-group counterexample population: income X ~ U[0,1], benefit == 1,
// cost R binary with R = 0 on [t_low, t_high] and Pr{R=1 | X} = q elsewhere.
// Welfare W(t) = t; budget B(t) = q*min(t, t_low) + q*max(t - t_high, 0).
struct Prop1Spec {
  double t_low = 0.4;
  double t_high = 0.6;
  double q = 0.5;
};

// One mixture component: group weight, normal benefit/cost laws, uniform
// income on [income_lo, income_hi]. Benefit/cost are independent of income.
struct MixtureGroup {
  double weight = 0.0;
  double benefit_mean = 0.0;
  double benefit_sd = 0.0;
  double cost_mean = 0.0;
  double cost_sd = 0.0;
  double income_lo = 0.0;
  double income_hi = 500.0;
};

struct DgpSpec {
  enum class Kind { prop1, calibrated_mixture, custom_table };
  Kind kind = Kind::prop1;
  Prop1Spec prop1;
  std::vector<MixtureGroup> groups;  // mixture kinds only
  double propensity = 0.5;           // constant treatment probability

  std::size_t num_groups() const;
};

// Stock three-group mixture: weights and benefit/cost means from the
// motivating application; benefit sd 0.5 and cost sd 2000 are free
// parameters chosen so rule differences are visible near n = 10^4.
DgpSpec calibrated_mixture();
DgpSpec prop1_dgp(double t_low = 0.4, double t_high = 0.6, double q = 0.5,
                  double propensity = 0.5);

void validate(const DgpSpec& dgp);

struct PopMoments {
  double w = 0.0;
  double b = 0.0;
};

// Exact population welfare/budget of a policy; W(null) = B(null) = 0.
PopMoments population_moments(const DgpSpec& dgp,
                              const ThresholdPolicy& policy);

struct OracleOptimum {
  ThresholdPolicy policy;
  double w = 0.0;
  double b = 0.0;
  double value = 0.0;  // maximized objective
  bool fell_back_to_null = false;
};

// Brute-force argmax of W over {B <= k} on the grid; empty feasible set
// falls back to the null policy.
OracleOptimum constrained_optimum(const DgpSpec& dgp, const PolicyGrid& grid,
                                  double k);

// Brute-force argmax of W - lambda_bar*(B-k)_+ on the grid. When the grid
// has a feasible policy, verifies value >= constrained optimum's welfare.
OracleOptimum tradeoff_optimum(const DgpSpec& dgp, const PolicyGrid& grid,
                               double k, double lambda_bar);

// i.i.d. records with d ~ Bernoulli(propensity) independent of potential
// outcomes; y = d*y1 (y0 = 0), c = d*R, m = 0, v = group index.
// Deterministic in (dgp, n, seed) via counter-based streams.
std::vector<RawRecord> draw_sample(const DgpSpec& dgp, std::size_t n,
                                   std::uint64_t seed);

enum class ScoreMode { ipw, aipw };

struct RuleSpec {
  enum class Kind { sample_analog, mistake_control, tradeoff, fixed_policy };
  Kind kind = Kind::sample_analog;
  std::string name;
  double alpha = 0.05;              // mistake_control
  std::size_t critval_draws = 2000; // mistake_control
  double sigma_floor = 1e-12;       // mistake_control
  double lambda_bar = 0.0;          // tradeoff
  ThresholdPolicy fixed;            // fixed_policy (testing hook)
};

struct McConfig {
  std::size_t n = 0;
  std::size_t iters = 0;
  std::uint64_t master_seed = 42;
  double k = 0.0;
  double eps_w_rel = 1e-9;              // tolerance = eps_w_rel * |W(g*)|
  std::optional<double> eps_w_abs;      // overrides the relative rule
  ScoreMode mode = ScoreMode::ipw;
  double kappa = 0.0;                   // inert for synthetic samples (m == 0)
  double kappa_clip = kDefaultKappaClip;
  bool keep_iteration_rows = true;
};

struct RuleMetrics {
  std::string name;
  double prob_infeasible = 0.0;       // share with B(g_hat;P) > k
  double prob_infeasible_weak = 0.0;  // share with B(g_hat;P) >= k
  double prob_suboptimal = 0.0;       // share with W(g_hat;P) < W(g*;P) - eps_w
  double avg_welfare_loss = 0.0;      // mean (W*-W)/W* if W* > 0, else mean W*-W
  bool welfare_loss_absolute = false;
  double avg_cost = 0.0;              // mean B(g_hat;P)
  double null_fallback_share = 0.0;
};

struct IterationRow {
  std::size_t iter = 0;
  std::size_t rule = 0;  // index into RuleMetrics order
  ThresholdPolicy policy;
  double w_pop = 0.0;
  double b_pop = 0.0;
  bool feasible = false;  // !(b_pop > k)
  bool fell_back = false;
};

struct MonteCarloReport {
  std::size_t n = 0;
  std::size_t iters = 0;
  std::uint64_t master_seed = 0;
  double k = 0.0;
  double eps_w_used = 0.0;
  ThresholdPolicy g_star;
  double w_star = 0.0;
  double b_star = 0.0;
  std::vector<RuleMetrics> rules;
  std::vector<IterationRow> rows;  // iteration-major, then rule order
};

// Per iteration: draw_sample -> scores -> moment_table -> each rule ->
// evaluate the selected policy under population_moments. Iteration seeds
// derive from (master_seed, iteration), so iterations are order-independent
// and the report is identical for any thread count. A failed iteration
// aborts with the iteration index and seed in the error message.
MonteCarloReport run_monte_carlo(const DgpSpec& dgp, const PolicyGrid& grid,
                                 const std::vector<RuleSpec>& rules,
                                 const McConfig& cfg);

}  // namespace ewmb
