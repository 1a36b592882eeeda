#include "ewmb/scoring.hpp"

#include <cmath>
#include <string>

#include "ewmb/errors.hpp"

namespace ewmb {

namespace {

// Error messages number records from 1, matching the CSV line convention.
void check_record(const RawRecord& r, std::size_t i) {
  const std::string where = "record " + std::to_string(i + 1) + ": ";
  if (r.d != 0 && r.d != 1) throw DataError(where + "d must be 0 or 1");
  if (r.m != 0 && r.m != 1) throw DataError(where + "m must be 0 or 1");
  if (r.m > r.d) throw DataError(where + "m = 1 requires d = 1");
  if (r.d == 0 && r.c != 0.0)
    throw DataError(where + "cost must be 0 for untreated records");
  if (!std::isfinite(r.y) || !std::isfinite(r.c) || !std::isfinite(r.x.income))
    throw DataError(where + "non-finite field");
}

}  // namespace

double excess_cost_transform(double c, int m, double kappa) {
  return c - kappa * static_cast<double>(m);
}

std::vector<ScoredRecord> ipw_scores(const std::vector<RawRecord>& records,
                                     const std::map<int, double>& propensity,
                                     double kappa, double kappa_clip) {
  if (records.empty()) throw DataError("ipw_scores: empty record list");
  if (kappa < 0.0) throw ConfigError("ipw_scores: kappa must be >= 0");
  std::vector<ScoredRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RawRecord& r = records[i];
    check_record(r, i);
    const auto it = propensity.find(r.v);
    if (it == propensity.end())
      throw ConfigError("ipw_scores: no propensity configured for cell id " +
                        std::to_string(r.v));
    const double p = it->second;
    // Known propensities are never clipped; insufficient overlap is an error.
    if (!(p >= kappa_clip && p <= 1.0 - kappa_clip))
      throw NumericError("ipw_scores: propensity " + std::to_string(p) +
                         " for cell " + std::to_string(r.v) +
                         " violates strict overlap [" +
                         std::to_string(kappa_clip) + ", " +
                         std::to_string(1.0 - kappa_clip) + "]");
    const double d = static_cast<double>(r.d);
    const double z = excess_cost_transform(r.c, r.m, kappa);
    ScoredRecord s;
    s.gamma_star = (d / p - (1.0 - d) / (1.0 - p)) * r.y;
    s.r_star = (d / p) * z;
    s.x = r.x;
    out.push_back(s);
  }
  return out;
}

SaturatedFit fit_saturated(const std::vector<RawRecord>& records,
                           OutcomeKind kind, double kappa, double kappa_clip) {
  if (records.empty()) throw DataError("fit_saturated: empty record list");
  if (!(kappa_clip > 0.0 && kappa_clip < 0.5))
    throw ConfigError("fit_saturated: kappa_clip must lie in (0, 0.5)");
  SaturatedFit fit;
  fit.kind = kind;
  struct Acc {
    double sum0 = 0.0, sum1 = 0.0;
    std::size_t n0 = 0, n1 = 0;
  };
  std::map<int, Acc> acc;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RawRecord& r = records[i];
    check_record(r, i);
    const double value = kind == OutcomeKind::benefit
                             ? r.y
                             : excess_cost_transform(r.c, r.m, kappa);
    Acc& a = acc[r.v];
    if (r.d == 1) {
      a.sum1 += value;
      ++a.n1;
    } else {
      a.sum0 += value;
      ++a.n0;
    }
  }
  for (const auto& [v, a] : acc) {
    if (a.n0 == 0 || a.n1 == 0)
      throw NumericError("fit_saturated: cell " + std::to_string(v) +
                         " has an empty treatment arm (n0=" +
                         std::to_string(a.n0) + ", n1=" +
                         std::to_string(a.n1) + ")");
    SaturatedFit::Cell cell;
    cell.mean0 = a.sum0 / static_cast<double>(a.n0);
    cell.mean1 = a.sum1 / static_cast<double>(a.n1);
    cell.n0 = a.n0;
    cell.n1 = a.n1;
    const double share =
        static_cast<double>(a.n1) / static_cast<double>(a.n0 + a.n1);
    cell.p_hat = std::min(std::max(share, kappa_clip), 1.0 - kappa_clip);
    fit.cells.emplace(v, cell);
  }
  return fit;
}

std::vector<ScoredRecord> aipw_scores(const std::vector<RawRecord>& records,
                                      double kappa, double kappa_clip) {
  const SaturatedFit fy =
      fit_saturated(records, OutcomeKind::benefit, kappa, kappa_clip);
  const SaturatedFit fz =
      fit_saturated(records, OutcomeKind::excess_cost, kappa, kappa_clip);
  std::vector<ScoredRecord> out;
  out.reserve(records.size());
  for (const RawRecord& r : records) {
    const auto& cy = fy.cells.at(r.v);
    const auto& cz = fz.cells.at(r.v);
    const double d = static_cast<double>(r.d);
    const double p = cy.p_hat;
    const double alpha_vd = d / p - (1.0 - d) / (1.0 - p);
    const double z = excess_cost_transform(r.c, r.m, kappa);
    const double y_fit = r.d == 1 ? cy.mean1 : cy.mean0;
    const double z_fit = r.d == 1 ? cz.mean1 : cz.mean0;
    ScoredRecord s;
    s.gamma_star = cy.mean1 - cy.mean0 + alpha_vd * (r.y - y_fit);
    s.r_star = cz.mean1 + (d / p) * (z - z_fit);
    s.x = r.x;
    out.push_back(s);
  }
  return out;
}

}  // namespace ewmb
