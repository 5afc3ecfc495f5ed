#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "density.hpp"
#include "ecf.hpp"
#include "errors.hpp"
#include "numerics.hpp"

namespace phasedecon {

struct AmiseTerms
{
  double bias = 0.0;
  double variance = 0.0;
  double total() const { return bias + variance; }
};

//! Normal-Laplace approximation of the AMISE:
//!   (2 pi)^-1 int exp(-sx^2 t^2) [K(ht) - 1]^2 dt
//! + (2 pi)^-1 int K(ht)^2 sum q^2 / [sum q_j (1 + sigma_j^2 t^2 / 2)^-1]^2 dt,
//! integrated over [-1/h, 1/h] united with [-8/sx, 8/sx].
class AmiseObjective
{
public:
  AmiseObjective(double sigma_x_sq,
                 std::span<const double> sigma_sq,
                 std::span<const double> q,
                 std::size_t nodes = 513)
    : sigma_x_sq_(sigma_x_sq)
    , nodes_(std::max<std::size_t>(nodes, 3))
  {
    if (!(sigma_x_sq > 0.0))
      throw InvalidArgument("AMISE: sigma_X^2 must be positive");
    if (sigma_sq.size() != q.size() || q.empty())
      throw InvalidArgument("AMISE: variances and weights differ in length");
    std::map<double, double> grouped;
    for (std::size_t j = 0; j < q.size(); ++j) {
      grouped[sigma_sq[j]] += q[j];
      sum_q2_ += q[j] * q[j];
    }
    groups_.assign(grouped.begin(), grouped.end());
  }

  AmiseTerms terms(double h) const
  {
    if (!(h > 0.0))
      throw InvalidArgument("AMISE: bandwidth must be positive");
    const double kernel_end = 1.0 / h;
    const double gauss_end = 8.0 / std::sqrt(sigma_x_sq_);
    AmiseTerms out;
    // Simpson inside the kernel support; the kernel-free Gaussian tail in closed form
    out.bias = simpson(
      [&](double t) {
        const double k = kernel_ft(t, h) - 1.0;
        return std::exp(-sigma_x_sq_ * t * t) * k * k;
      },
      0.0, kernel_end, nodes_ - 1);
    if (gauss_end > kernel_end) {
      const double s = std::sqrt(sigma_x_sq_);
      out.bias += 0.5 * std::sqrt(kPi) / s * (std::erfc(s * kernel_end) - std::erfc(s * gauss_end));
    }
    out.variance = trapezoid(
      [&](double t) {
        const double k = kernel_ft(t, h);
        if (k == 0.0)
          return 0.0;
        const double d = laplace_denominator(t);
        return k * k * sum_q2_ / (d * d);
      },
      0.0, kernel_end, nodes_);
    // even integrands: (2 pi)^-1 * 2 * half-line integral
    out.bias /= kPi;
    out.variance /= kPi;
    return out;
  }

  double operator()(double h) const { return terms(h).total(); }

  double sigma_x_sq() const { return sigma_x_sq_; }
  double sum_q2() const { return sum_q2_; }

private:
  double laplace_denominator(double t) const
  {
    double d = 0.0;
    for (const auto& [s2, qsum] : groups_)
      d += qsum / (1.0 + 0.5 * s2 * t * t);
    return d;
  }

  double sigma_x_sq_;
  std::size_t nodes_;
  double sum_q2_ = 0.0;
  std::vector<std::pair<double, double>> groups_;
};

inline double amise_objective(double h,
                              double sigma_x_sq,
                              std::span<const double> sigma_sq,
                              std::span<const double> q)
{
  return AmiseObjective(sigma_x_sq, sigma_sq, q)(h);
}

struct BandwidthSearch
{
  std::vector<double> hGrid;
  std::vector<double> values;
  double h = 0.0;
  double value = 0.0;
  bool widened = false;
  bool boundary = false; //!< minimum still on the grid edge after widening
};

//! Argmin of a bandwidth objective over a 200-point log grid, refined by
//! golden-section search (in log h) inside the bracketing triple. A minimum
//! on the grid edge widens that side tenfold once.
template <class Objective>
BandwidthSearch minimize_bandwidth(const Objective& objective,
                                   std::pair<double, double> range,
                                   std::size_t grid_points = 200)
{
  if (!(range.first > 0.0) || !(range.second > range.first))
    throw InvalidArgument("bandwidth search: invalid range");
  BandwidthSearch out;
  auto scan = [&](double lo, double hi) {
    out.hGrid = linspace(std::log(lo), std::log(hi), grid_points);
    out.values.resize(grid_points);
    for (std::size_t k = 0; k < grid_points; ++k) {
      out.hGrid[k] = std::exp(out.hGrid[k]);
      out.values[k] = objective(out.hGrid[k]);
    }
    return static_cast<std::size_t>(
      std::min_element(out.values.begin(), out.values.end()) - out.values.begin());
  };

  double lo = range.first;
  double hi = range.second;
  std::size_t best = scan(lo, hi);
  if (best == 0 || best + 1 == grid_points) {
    out.widened = true;
    if (best == 0)
      lo /= 10.0;
    else
      hi *= 10.0;
    best = scan(lo, hi);
  }
  out.h = out.hGrid[best];
  out.value = out.values[best];
  if (best == 0 || best + 1 == grid_points) {
    out.boundary = true;
    return out;
  }

  constexpr double kInvPhi = 0.6180339887498949;
  double a = std::log(out.hGrid[best - 1]);
  double b = std::log(out.hGrid[best + 1]);
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = objective(std::exp(c));
  double fd = objective(std::exp(d));
  for (int it = 0; it < 60 && (b - a) > 1e-9; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = objective(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = objective(std::exp(d));
    }
  }
  const double h_ref = std::exp(0.5 * (a + b));
  const double f_ref = objective(h_ref);
  if (f_ref <= out.value) {
    out.h = h_ref;
    out.value = f_ref;
  }
  return out;
}

//! Default search range: [0.01, 10] * sigma_X * n_eff^{-1/5}, n_eff = 1 / sum q^2.
inline std::pair<double, double> default_bandwidth_range(double sigma_x_sq, std::span<const double> q)
{
  double sum_q2 = 0.0;
  for (double v : q)
    sum_q2 += v * v;
  const double scale = std::sqrt(sigma_x_sq) * std::pow(sum_q2, 0.2);
  return {1e-2 * scale, 10.0 * scale};
}

inline BandwidthSearch select_bandwidth(double sigma_x_sq,
                                        std::span<const double> sigma_sq,
                                        std::span<const double> q,
                                        std::optional<std::pair<double, double>> range = std::nullopt)
{
  const AmiseObjective objective(sigma_x_sq, sigma_sq, q);
  return minimize_bandwidth(objective, range.value_or(default_bandwidth_range(sigma_x_sq, q)));
}

struct MiseTerms
{
  double bias = 0.0;      //!< (2 pi)^-1 int |phi_X|^2 [K - 1]^2
  double variance = 0.0;  //!< (2 pi)^-1 int K^2 sum q^2 / D^2
  double remainder = 0.0; //!< -(2 pi)^-1 int |phi_X|^2 K^2 sum q^2 phi_j^2 / D^2
  double retained() const { return bias + variance; }
  double total() const { return bias + variance + remainder; }
};

//! Exact MISE of the known-error weighted estimator, with the third term
//! reported separately. `l2_norm_sq` is the integral of f_X^2; it closes
//! the bias integral beyond the kernel support.
inline MiseTerms exact_mise(double h,
                            const CfFunction& phi_x,
                            const ObservationErrorCf& err_cf,
                            std::span<const double> q,
                            double l2_norm_sq,
                            std::size_t nodes = 2049)
{
  if (!(h > 0.0))
    throw InvalidArgument("exact_mise: bandwidth must be positive");
  double sum_q2 = 0.0;
  for (double v : q)
    sum_q2 += v * v;
  const double end = 1.0 / h;
  const double dt = end / static_cast<double>(nodes - 1);
  double bias = 0.0;
  double variance = 0.0;
  double remainder = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = dt * static_cast<double>(k);
    const double w = (k == 0 || k + 1 == nodes) ? 0.5 * dt : dt;
    const double a2 = std::norm(phi_x(t));
    const double kf = kernel_ft(t, h);
    double d = 0.0;
    double e2 = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double e = err_cf(j, t);
      d += q[j] * e;
      e2 += q[j] * q[j] * e * e;
    }
    bias += w * a2 * ((kf - 1.0) * (kf - 1.0) - 1.0);
    if (kf != 0.0) {
      variance += w * kf * kf * sum_q2 / (d * d);
      remainder -= w * a2 * kf * kf * e2 / (d * d);
    }
  }
  MiseTerms out;
  out.bias = l2_norm_sq + bias / kPi;
  out.variance = variance / kPi;
  out.remainder = remainder / kPi;
  return out;
}

} // namespace phasedecon
