#pragma once

#include <cstddef>
#include <vector>

#include "ewmb/matrix.hpp"
#include "ewmb/policy.hpp"
#include "ewmb/scoring.hpp"

namespace ewmb {

// Per-policy sample moments over a grid, rows aligned with grid order:
//   w_hat(g) = (1/n) sum gamma_star_i * g(x_i)
//   b_hat(g) = (1/n) sum r_star_i * g(x_i)
//   cov_b(g,g') = (1/n) sum r_star_i^2 g(x_i) g'(x_i) - b_hat(g) b_hat(g')
//   sigma_b(g) = sqrt(cov_b(g,g))
// cov_b may be absent (diagonal-only mode); sigma_b is always filled.
struct MomentTable {
  PolicyGrid grid;
  std::size_t n = 0;
  std::vector<double> w_hat;
  std::vector<double> b_hat;
  std::vector<double> sigma_b;
  SquareMatrix cov_b;

  bool has_cov() const { return !cov_b.empty(); }
};

double welfare_hat(const std::vector<ScoredRecord>& scores,
                   const ThresholdPolicy& policy);
double budget_hat(const std::vector<ScoredRecord>& scores,
                  const ThresholdPolicy& policy);

enum class CovMode { full, diagonal_only };

// OpenMP-parallel over policies; per-policy sums run in record-index order,
// so the result is bit-identical to moment_table_serial for any thread count.
MomentTable moment_table(const std::vector<ScoredRecord>& scores,
                         const PolicyGrid& grid, CovMode mode = CovMode::full);

// Plain-loop reference implementation kept for testing and benchmarks.
MomentTable moment_table_serial(const std::vector<ScoredRecord>& scores,
                                const PolicyGrid& grid,
                                CovMode mode = CovMode::full);

}  // namespace ewmb
