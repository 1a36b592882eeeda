#include "ewmb/policy.hpp"

#include <cmath>
#include <string>

#include "ewmb/errors.hpp"

namespace ewmb {

namespace {
constexpr std::size_t kGridGuardrail = 5000;
}

bool lex_less(const ThresholdPolicy& a, const ThresholdPolicy& b) {
  const std::size_t m = std::min(a.thresholds.size(), b.thresholds.size());
  for (std::size_t j = 0; j < m; ++j) {
    if (a.thresholds[j] != b.thresholds[j])
      return a.thresholds[j] < b.thresholds[j];
  }
  return a.thresholds.size() < b.thresholds.size();
}

bool assign(const ThresholdPolicy& policy, const Covariates& x) {
  if (x.group < 0 ||
      static_cast<std::size_t>(x.group) >= policy.thresholds.size()) {
    throw DataError("assign: group index " + std::to_string(x.group) +
                    " out of range for " +
                    std::to_string(policy.thresholds.size()) + " groups");
  }
  return x.income <= policy.thresholds[static_cast<std::size_t>(x.group)];
}

ThresholdPolicy null_policy(std::size_t num_groups) {
  if (num_groups == 0) throw ConfigError("null_policy: group count must be >= 1");
  return ThresholdPolicy{std::vector<double>(num_groups, 0.0)};
}

std::size_t PolicyGrid::num_groups() const {
  if (!cutoffs.empty()) return cutoffs.size();
  return policies.empty() ? 0 : policies.front().thresholds.size();
}

std::size_t PolicyGrid::meet_index(std::size_t i, std::size_t j) const {
  // Componentwise min of cutoff values == componentwise min of digit
  // indices because each cutoff list is sorted.
  std::size_t out = 0;
  for (std::size_t g = 0; g < cutoffs.size(); ++g) {
    const std::size_t di = (i / strides[g]) % cutoffs[g].size();
    const std::size_t dj = (j / strides[g]) % cutoffs[g].size();
    out += std::min(di, dj) * strides[g];
  }
  return out;
}

PolicyGrid PolicyGrid::from_policies(std::vector<ThresholdPolicy> policies) {
  if (policies.empty()) throw ConfigError("policy grid: empty policy list");
  const std::size_t j = policies.front().thresholds.size();
  for (const auto& p : policies) {
    if (p.thresholds.size() != j)
      throw ConfigError("policy grid: inconsistent group counts");
  }
  PolicyGrid grid;
  grid.policies = std::move(policies);
  return grid;
}

PolicyGrid enumerate_grid(const GridSpec& spec) {
  if (spec.cutoffs.empty())
    throw ConfigError("grid spec: no groups configured");
  std::size_t total = 1;
  for (std::size_t g = 0; g < spec.cutoffs.size(); ++g) {
    const auto& list = spec.cutoffs[g];
    if (list.empty())
      throw ConfigError("grid spec: empty cutoff list for group " +
                        std::to_string(g));
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!std::isfinite(list[i]) || list[i] < 0.0)
        throw ConfigError("grid spec: cutoffs must be finite and nonnegative "
                          "(group " + std::to_string(g) + ")");
      if (i > 0 && list[i] <= list[i - 1])
        throw ConfigError("grid spec: cutoffs must be strictly increasing "
                          "(group " + std::to_string(g) + ")");
    }
    total *= list.size();
  }
  if (total > kGridGuardrail && !spec.allow_large)
    throw ConfigError("grid spec: " + std::to_string(total) +
                      " policies exceeds the guardrail of " +
                      std::to_string(kGridGuardrail) +
                      " (covariance memory grows quadratically); pass the "
                      "large-grid override to proceed");

  PolicyGrid grid;
  grid.cutoffs = spec.cutoffs;
  const std::size_t j = spec.cutoffs.size();
  grid.strides.assign(j, 1);
  for (std::size_t g = j; g-- > 1;)
    grid.strides[g - 1] = grid.strides[g] * spec.cutoffs[g].size();

  grid.policies.reserve(total);
  std::vector<std::size_t> digit(j, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    ThresholdPolicy p;
    p.thresholds.resize(j);
    for (std::size_t g = 0; g < j; ++g) p.thresholds[g] = spec.cutoffs[g][digit[g]];
    grid.policies.push_back(std::move(p));
    // lexicographic increment: last group varies fastest
    for (std::size_t g = j; g-- > 0;) {
      if (++digit[g] < spec.cutoffs[g].size()) break;
      digit[g] = 0;
    }
  }
  return grid;
}

}  // namespace ewmb
