#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ewmb/matrix.hpp"

namespace ewmb {

// Lower-triangular factor L with L*L^T ~= cov + epsilon*I.
struct PsdFactor {
  SquareMatrix L;
  double epsilon = 0.0;
};

// Tries jitters {0, 1e-10, 1e-8, 1e-6} * trace/dim in order and returns
// the factor for the smallest one whose Cholesky succeeds (finite factor,
// reconstruction residual small). Throws NumericError if all fail.
PsdFactor psd_factor(const SquareMatrix& cov);

// Request for the simulated lower quantile of the normalized minimum of a
// mean-zero Gaussian vector h ~ N(0, cov_b): per draw, min over surviving
// policies of h(g)/sigma_b(g); the returned c_alpha is the order statistic
// at index ceil(alpha * n_draws) of the draws' minima (no interpolation).
//
// The minimum is signed (no absolute value), so c_alpha < 0 for alpha well
// below one half.
//
// A policy survives iff sigma_b(g) > 0 and sigma_b(g) >= sigma_floor * max
// sigma_b; exactly-degenerate policies (e.g. the all-zero policy) never
// survive. Normal inputs are keyed by (seed, draw index, policy index), so
// adding policies to the grid leaves earlier policies' draws unchanged.
struct CritValRequest {
  SquareMatrix cov_b;
  double alpha = 0.05;           // in (0, 0.5]
  std::size_t n_draws = 10000;   // >= 1; production paths use >= 1000
  std::uint64_t seed = 1;
  double sigma_floor = 1e-12;    // relative to max sigma_b over the grid
};

struct CritValResult {
  double c_alpha = 0.0;
  double epsilon = 0.0;          // jitter used by psd_factor
  std::size_t n_excluded = 0;    // policies below the sigma floor
  std::size_t n_survivors = 0;
};

// OpenMP-parallel across fixed-size draw blocks; per-draw results land in
// preallocated slots, so output is bit-identical for any thread count and
// identical to critical_value_serial.
CritValResult critical_value(const CritValRequest& req);

// Same kernel without the parallel loop; reference for tests and benchmarks.
CritValResult critical_value_serial(const CritValRequest& req);

}  // namespace ewmb
