#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ewmb {

// One unit's observed characteristics: income (percent of the poverty
// level) and a dense 0-based group index (e.g. number-of-children bucket).
struct Covariates {
  double income = 0.0;
  int group = 0;
};

// Deterministic eligibility rule: assign iff income <= thresholds[group].
// A threshold of 0 assigns nobody in its group.
struct ThresholdPolicy {
  std::vector<double> thresholds;
};

// True lexicographic order on threshold vectors; rules use it to break ties.
bool lex_less(const ThresholdPolicy& a, const ThresholdPolicy& b);

bool assign(const ThresholdPolicy& policy, const Covariates& x);

ThresholdPolicy null_policy(std::size_t num_groups);

struct GridSpec {
  std::vector<std::vector<double>> cutoffs;  // per group, strictly increasing
  bool allow_large = false;                  // override the 5000-policy guardrail
};

// Cartesian product of per-group cutoff lists in ascending lexicographic
// order (first group varies slowest). Immutable after construction.
struct PolicyGrid {
  std::vector<std::vector<double>> cutoffs;
  std::vector<ThresholdPolicy> policies;
  std::vector<std::size_t> strides;  // mixed-radix strides; empty if the grid
                                     // was not built from a product spec

  std::size_t size() const { return policies.size(); }
  std::size_t num_groups() const;
  bool is_product() const { return !strides.empty(); }

  // Index of the componentwise-min policy of i and j. Product grids only;
  // the min lives in the same product set because cutoff lists are sorted.
  std::size_t meet_index(std::size_t i, std::size_t j) const;

  // Wraps an explicit policy list (no product structure, no meet support).
  static PolicyGrid from_policies(std::vector<ThresholdPolicy> policies);
};

PolicyGrid enumerate_grid(const GridSpec& spec);

}  // namespace ewmb
