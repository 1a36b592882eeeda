#include "ewmb/critical_value.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "ewmb/errors.hpp"
#include "ewmb/rng.hpp"

namespace ewmb {

namespace {

using RowMajorMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajorMat>;

// Draws are processed in fixed-size blocks so the per-draw numeric path is
// independent of the thread count (each block is one self-contained
// triangular product).
constexpr std::size_t kDrawBlock = 64;

void check_symmetric(const SquareMatrix& cov) {
  double scale = 1.0;
  for (std::size_t i = 0; i < cov.dim; ++i)
    for (std::size_t j = 0; j < cov.dim; ++j)
      scale = std::max(scale, std::abs(cov.at(i, j)));
  for (std::size_t i = 0; i < cov.dim; ++i) {
    for (std::size_t j = i + 1; j < cov.dim; ++j) {
      if (std::abs(cov.at(i, j) - cov.at(j, i)) > 1e-8 * scale)
        throw NumericError("psd_factor: matrix is not symmetric");
    }
  }
}

}  // namespace

PsdFactor psd_factor(const SquareMatrix& cov) {
  if (cov.dim == 0) throw ConfigError("psd_factor: empty matrix");
  check_symmetric(cov);
  const auto n = static_cast<Eigen::Index>(cov.dim);
  ConstMap a(cov.a.data(), n, n);

  double trace = 0.0;
  for (std::size_t i = 0; i < cov.dim; ++i) trace += cov.at(i, i);
  const double base = trace / static_cast<double>(cov.dim);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());

  static constexpr double kSchedule[] = {0.0, 1e-10, 1e-8, 1e-6};
  for (const double mult : kSchedule) {
    const double eps = mult * base;
    RowMajorMat jittered = a;
    jittered.diagonal().array() += eps;
    Eigen::LLT<RowMajorMat> llt(jittered);
    if (llt.info() != Eigen::Success) continue;
    RowMajorMat L = llt.matrixL();
    if (!L.allFinite()) continue;
    // LLT can "succeed" on exactly singular input with a garbage factor;
    // accept only if the reconstruction is tight.
    const double resid =
        (L * L.transpose() - jittered).cwiseAbs().maxCoeff();
    if (resid > 1e-8 * std::max(scale, eps)) continue;

    PsdFactor out;
    out.epsilon = eps;
    out.L = SquareMatrix(cov.dim);
    for (std::size_t i = 0; i < cov.dim; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        out.L.at(i, j) = L(static_cast<Eigen::Index>(i),
                           static_cast<Eigen::Index>(j));
    return out;
  }
  throw NumericError(
      "psd_factor: matrix is not positive semidefinite within the jitter "
      "schedule");
}

namespace {

CritValResult critical_value_impl(const CritValRequest& req, bool parallel) {
  const SquareMatrix& cov = req.cov_b;
  const std::size_t m = cov.dim;
  if (m == 0) throw ConfigError("critical_value: empty covariance matrix");
  if (!(req.alpha > 0.0 && req.alpha <= 0.5))
    throw ConfigError("critical_value: alpha must lie in (0, 0.5]");
  if (req.n_draws == 0)
    throw ConfigError("critical_value: n_draws must be >= 1");
  if (req.sigma_floor < 0.0)
    throw ConfigError("critical_value: sigma_floor must be >= 0");

  std::vector<double> sigma(m);
  double sigma_max = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sigma[i] = std::sqrt(std::max(cov.at(i, i), 0.0));
    sigma_max = std::max(sigma_max, sigma[i]);
  }
  const double floor_abs = req.sigma_floor * sigma_max;
  std::vector<std::uint32_t> survivors;
  survivors.reserve(m);
  for (std::size_t i = 0; i < m; ++i)
    if (sigma[i] > 0.0 && sigma[i] >= floor_abs)
      survivors.push_back(static_cast<std::uint32_t>(i));
  if (survivors.empty())
    throw NumericError(
        "critical_value: no policy with positive budget variance survives "
        "the sigma floor (grid is fully degenerate)");

  const PsdFactor factor = psd_factor(cov);
  const auto em = static_cast<Eigen::Index>(m);
  ConstMap lmap(factor.L.a.data(), em, em);

  const std::size_t n_draws = req.n_draws;
  std::vector<double> minima(n_draws);
  const std::size_t n_blocks = (n_draws + kDrawBlock - 1) / kDrawBlock;

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t bi = 0; bi < static_cast<std::int64_t>(n_blocks); ++bi) {
    const std::size_t start = static_cast<std::size_t>(bi) * kDrawBlock;
    const std::size_t cols = std::min(kDrawBlock, n_draws - start);
    Eigen::MatrixXd z(em, static_cast<Eigen::Index>(cols));
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t j = 0; j < m; ++j)
        z(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) =
            rng::normal(req.seed, start + c, j);
    Eigen::MatrixXd h(em, static_cast<Eigen::Index>(cols));
    h.noalias() = lmap.triangularView<Eigen::Lower>() * z;
    for (std::size_t c = 0; c < cols; ++c) {
      double v = std::numeric_limits<double>::infinity();
      for (const std::uint32_t i : survivors) {
        const double stat = h(static_cast<Eigen::Index>(i),
                              static_cast<Eigen::Index>(c)) /
                            sigma[i];
        v = std::min(v, stat);
      }
      minima[start + c] = v;
    }
  }

  std::sort(minima.begin(), minima.end());
  // Order statistic at ceil(alpha * n_draws); the nudge keeps round products
  // like 0.05 * 200000 from spilling to the next index.
  const double pos = std::ceil(req.alpha * static_cast<double>(n_draws) - 1e-9);
  std::size_t idx = pos < 1.0 ? 1 : static_cast<std::size_t>(pos);
  idx = std::min(idx, n_draws);

  CritValResult res;
  res.c_alpha = minima[idx - 1];
  res.epsilon = factor.epsilon;
  res.n_survivors = survivors.size();
  res.n_excluded = m - survivors.size();
  return res;
}

}  // namespace

CritValResult critical_value(const CritValRequest& req) {
  return critical_value_impl(req, true);
}

CritValResult critical_value_serial(const CritValRequest& req) {
  return critical_value_impl(req, false);
}

}  // namespace ewmb
