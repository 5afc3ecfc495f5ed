#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "density.hpp"
#include "ecf.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "numerics.hpp"

namespace phasedecon {

//! Integrated squared error on the estimate's own grid (trapezoid rule).
inline double ise(std::span<const double> xs, std::span<const double> fs, std::span<const double> truth)
{
  if (xs.size() != fs.size() || xs.size() != truth.size())
    throw InvalidArgument("ise: grid and value sizes differ");
  std::vector<double> sq(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k)
    sq[k] = (fs[k] - truth[k]) * (fs[k] - truth[k]);
  return trapezoid(xs, sq);
}

inline double ise(const DensityEstimate& est, const TrueDensitySpec& truth)
{
  const auto f = true_density(truth, est.xs);
  return ise(est.xs, est.fs, f);
}

//! Integral of |rho_hat - rho_X|^2 over [-t*, t*] (trapezoid on the grid).
inline double phase_ise(const PhaseEstimate& est, std::span<const cplx> truth, double t_star)
{
  if (truth.size() != est.grid.size())
    throw InvalidArgument("phase_ise: truth is not on the estimate's grid");
  const auto& g = est.grid;
  double sum = 0.0;
  for (std::size_t k = 1; k < g.size(); ++k) {
    const double a = g[k - 1];
    const double b = g[k];
    if (a < -t_star - 1e-12 || b > t_star + 1e-12)
      continue;
    sum += 0.5 * (b - a) * (std::norm(est.phase[k - 1] - truth[k - 1]) + std::norm(est.phase[k] - truth[k]));
  }
  return sum;
}

struct MiseRatio
{
  double ratio = 0.0;
  std::optional<double> se; //!< jackknife SE; needs at least two pairs
};

//! mean(ise_eq) / mean(ise_opt) with the leave-one-out jackknife SE
//!   sqrt(N^-1 sum_j (R_(-j) - R_bar)^2).
inline MiseRatio mise_ratio_with_jackknife(std::span<const double> ise_eq, std::span<const double> ise_opt)
{
  const std::size_t n = ise_eq.size();
  if (n == 0 || ise_opt.size() != n)
    throw InvalidArgument("mise_ratio: need matching, non-empty ISE samples");
  double sum_eq = 0.0;
  double sum_opt = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sum_eq += ise_eq[j];
    sum_opt += ise_opt[j];
  }
  if (!(sum_opt > 0.0))
    throw InvalidArgument("mise_ratio: zero denominator");
  MiseRatio out;
  out.ratio = sum_eq / sum_opt;
  if (n < 2)
    return out;

  std::vector<double> loo(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double den = sum_opt - ise_opt[j];
    if (!(den > 0.0))
      throw InvalidArgument("mise_ratio: zero leave-one-out denominator");
    loo[j] = (sum_eq - ise_eq[j]) / den;
  }
  const double r_bar = mean(loo);
  double ss = 0.0;
  for (double r : loo)
    ss += (r - r_bar) * (r - r_bar);
  out.se = std::sqrt(ss / static_cast<double>(n));
  return out;
}

struct Quartiles
{
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

//! Type-7 (linear interpolation) sample quantile.
inline double quantile(std::vector<double> values, double prob)
{
  if (values.empty())
    throw InvalidArgument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline Quartiles quartile_summary(std::span<const double> values)
{
  std::vector<double> v(values.begin(), values.end());
  return {quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
}

} // namespace phasedecon
