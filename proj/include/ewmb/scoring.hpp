#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "ewmb/policy.hpp"

namespace ewmb {

// One raw experimental record.
//   y: outcome; c: observed cost to government (0 when untreated);
//   m: enrollment indicator; d: treatment-arm indicator;
//   v: discrete confounder cell id.
// Invariants: d,m in {0,1}; m <= d; c == 0 whenever d == 0.
struct RawRecord {
  double y = 0.0;
  double c = 0.0;
  int m = 0;
  int d = 0;
  Covariates x;
  int v = 0;
};

// Per-unit benefit score gamma_star and excess-cost score r_star. r_star may
// be negative (costs below the status-quo per-enrollee spend).
struct ScoredRecord {
  double gamma_star = 0.0;
  double r_star = 0.0;
  Covariates x;
};

// Excess cost relative to a status-quo spend of kappa per enrollee.
double excess_cost_transform(double c, int m, double kappa);

// Known-propensity inverse-propensity scores:
//   gamma_star = (d/p(v) - (1-d)/(1-p(v))) * y,  r_star = (d/p(v)) * z,
// z = excess_cost_transform(c, m, kappa). Known propensities are never
// clipped: p(v) outside [kappa_clip, 1-kappa_clip] is an overlap error.
std::vector<ScoredRecord> ipw_scores(const std::vector<RawRecord>& records,
                                     const std::map<int, double>& propensity,
                                     double kappa, double kappa_clip);

enum class OutcomeKind { benefit, excess_cost };

// Cell means of one variable by (v, d) plus cell propensities. Every v-cell
// must contain both arms; p_hat is clipped into [kappa_clip, 1-kappa_clip].
struct SaturatedFit {
  struct Cell {
    double mean0 = 0.0;
    double mean1 = 0.0;
    double p_hat = 0.0;  // clipped treated share
    std::size_t n0 = 0;
    std::size_t n1 = 0;
  };
  std::map<int, Cell> cells;
  OutcomeKind kind = OutcomeKind::benefit;
};

SaturatedFit fit_saturated(const std::vector<RawRecord>& records,
                           OutcomeKind kind, double kappa, double kappa_clip);

// Augmented scores from saturated-model fits of the outcome and excess cost:
//   gamma_star = m1y - m0y + alpha(v,d) * (y - mdy)
//   r_star     = m1z + (d/p_hat) * (z - mdz)
// with alpha(v,d) = d/p_hat - (1-d)/(1-p_hat) and cell means m{0,1}{y,z}.
std::vector<ScoredRecord> aipw_scores(const std::vector<RawRecord>& records,
                                      double kappa, double kappa_clip);

inline constexpr double kDefaultKappa = 6000.0;
inline constexpr double kDefaultKappaClip = 0.01;

}  // namespace ewmb
