#include "ewmb/moments.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "ewmb/errors.hpp"

namespace ewmb {

namespace {

// Group indices are range-checked here, before the parallel loops: assign()
// must not throw inside an omp region (that would terminate the process).
void check_inputs(const std::vector<ScoredRecord>& scores,
                  const PolicyGrid& grid) {
  if (scores.empty()) throw DataError("moments: empty score list");
  if (grid.size() == 0) throw ConfigError("moments: empty policy grid");
  const int groups = static_cast<int>(grid.num_groups());
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i].x.group < 0 || scores[i].x.group >= groups)
      throw DataError("moments: record " + std::to_string(i + 1) +
                      " has group " + std::to_string(scores[i].x.group) +
                      " but the grid covers " + std::to_string(groups) +
                      " groups");
}

// One policy's sums accumulated in record-index order. This order is the
// contract: parallel and serial tables and welfare_hat/budget_hat all add
// the same terms in the same sequence, hence agree bit-for-bit.
struct PolicySums {
  double w = 0.0;
  double b = 0.0;
  double s2 = 0.0;  // sum of r_star^2 over assigned records
};

PolicySums policy_sums(const std::vector<ScoredRecord>& scores,
                       const ThresholdPolicy& policy) {
  PolicySums s;
  for (const ScoredRecord& r : scores) {
    if (assign(policy, r.x)) {
      s.w += r.gamma_star;
      s.b += r.r_star;
      s.s2 += r.r_star * r.r_star;
    }
  }
  return s;
}

// Cross second moment of policies i and j by direct summation, ascending
// record index.
double cross_s2(const std::vector<ScoredRecord>& scores,
                const ThresholdPolicy& pi, const ThresholdPolicy& pj) {
  double sum = 0.0;
  for (const ScoredRecord& r : scores)
    if (assign(pi, r.x) && assign(pj, r.x)) sum += r.r_star * r.r_star;
  return sum;
}

template <bool Parallel>
MomentTable build_table(const std::vector<ScoredRecord>& scores,
                        const PolicyGrid& grid, CovMode mode) {
  check_inputs(scores, grid);
  const std::size_t m = grid.size();
  const double n = static_cast<double>(scores.size());

  MomentTable t;
  t.grid = grid;
  t.n = scores.size();
  t.w_hat.resize(m);
  t.b_hat.resize(m);
  t.sigma_b.resize(m);
  std::vector<double> s2_mean(m);

#pragma omp parallel for schedule(static) if (Parallel)
  for (std::int64_t pi = 0; pi < static_cast<std::int64_t>(m); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    const PolicySums s = policy_sums(scores, grid.policies[p]);
    t.w_hat[p] = s.w / n;
    t.b_hat[p] = s.b / n;
    s2_mean[p] = s.s2 / n;
    t.sigma_b[p] = std::sqrt(std::max(s2_mean[p] - t.b_hat[p] * t.b_hat[p], 0.0));
  }

  if (mode == CovMode::diagonal_only) return t;

  t.cov_b = SquareMatrix(m);
  if (grid.is_product()) {
    // g(x)*g'(x) == (g meet g')(x): the cross second moment equals the meet
    // policy's own second moment (same summands, same record order), so
    // this path is bit-identical to the naive double loop.
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(m); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      for (std::size_t j = i; j < m; ++j) {
        const double cij =
            s2_mean[grid.meet_index(i, j)] - t.b_hat[i] * t.b_hat[j];
        t.cov_b.at(i, j) = cij;
        t.cov_b.at(j, i) = cij;
      }
    }
  } else {
#pragma omp parallel for schedule(dynamic) if (Parallel)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(m); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      for (std::size_t j = i; j < m; ++j) {
        const double cij =
            cross_s2(scores, grid.policies[i], grid.policies[j]) / n -
            t.b_hat[i] * t.b_hat[j];
        t.cov_b.at(i, j) = cij;
        t.cov_b.at(j, i) = cij;
      }
    }
  }
  return t;
}

}  // namespace

double welfare_hat(const std::vector<ScoredRecord>& scores,
                   const ThresholdPolicy& policy) {
  if (scores.empty()) throw DataError("welfare_hat: empty score list");
  double sum = 0.0;
  for (const ScoredRecord& r : scores)
    if (assign(policy, r.x)) sum += r.gamma_star;
  return sum / static_cast<double>(scores.size());
}

double budget_hat(const std::vector<ScoredRecord>& scores,
                  const ThresholdPolicy& policy) {
  if (scores.empty()) throw DataError("budget_hat: empty score list");
  double sum = 0.0;
  for (const ScoredRecord& r : scores)
    if (assign(policy, r.x)) sum += r.r_star;
  return sum / static_cast<double>(scores.size());
}

MomentTable moment_table(const std::vector<ScoredRecord>& scores,
                         const PolicyGrid& grid, CovMode mode) {
  return build_table<true>(scores, grid, mode);
}

MomentTable moment_table_serial(const std::vector<ScoredRecord>& scores,
                                const PolicyGrid& grid, CovMode mode) {
  return build_table<false>(scores, grid, mode);
}

}  // namespace ewmb
