#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "numerics.hpp"

namespace phasedecon {

//! Symmetric uniform grid on [-tMax, tMax] with an odd number of points.
class TGrid
{
public:
  static constexpr std::size_t kDefaultCount = 1025;

  TGrid(double t_max, std::size_t count)
    : t_max_(t_max)
    , values_(count)
  {
    if (!(t_max > 0.0) || !std::isfinite(t_max))
      throw InvalidArgument("TGrid: tMax must be positive and finite");
    if (count < 3 || count % 2 == 0)
      throw InvalidArgument("TGrid: count must be odd and at least 3");
    const std::size_t mid = count / 2;
    step_ = t_max / static_cast<double>(mid);
    for (std::size_t k = 0; k <= mid; ++k) {
      const double t = step_ * static_cast<double>(k);
      values_[mid + k] = t;
      values_[mid - k] = -t;
    }
    values_.back() = t_max;
    values_.front() = -t_max;
  }

  //! tMax = 40 / SD(w).
  static TGrid for_sample(std::span<const double> w, std::size_t count = kDefaultCount)
  {
    const double sd = std::sqrt(sample_variance(w));
    if (!(sd > 0.0))
      throw InvalidArgument("TGrid: sample has zero spread");
    return TGrid(40.0 / sd, count);
  }

  double t_max() const { return t_max_; }
  double step() const { return step_; }
  std::size_t size() const { return values_.size(); }
  std::size_t mid() const { return values_.size() / 2; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const TGrid& other) const
  {
    return t_max_ == other.t_max_ && values_.size() == other.values_.size();
  }

private:
  double t_max_;
  double step_ = 0.0;
  std::vector<double> values_;
};

//! sum_j q_j exp(i t_k w_j) for t_k = t0 + k dt, k < count.
inline std::vector<cplx> weighted_ecf_sweep(const ObservationSet& obs,
                                            double t0,
                                            double dt,
                                            std::size_t count)
{
  std::vector<cplx> acc(count, cplx(0.0));
  for (std::size_t j = 0; j < obs.size(); ++j) {
    const double q = obs.q[j];
    if (q == 0.0)
      continue;
    sweep_phasors(t0, dt, count, obs.w[j], [&](std::size_t k, cplx z) { acc[k] += q * z; });
  }
  return acc;
}

inline cplx weighted_ecf_at(const ObservationSet& obs, double t)
{
  cplx acc(0.0);
  for (std::size_t j = 0; j < obs.size(); ++j)
    acc += obs.q[j] * std::polar(1.0, t * obs.w[j]);
  return acc;
}

//! Weighted empirical characteristic function on the grid. Negative
//! frequencies are the conjugates of the positive ones.
inline std::vector<cplx> weighted_ecf(const ObservationSet& obs, const TGrid& grid)
{
  if (obs.size() == 0)
    throw InvalidArgument("weighted_ecf: empty observation set");
  obs.validate();
  const std::size_t mid = grid.mid();
  const auto half = weighted_ecf_sweep(obs, 0.0, grid.step(), mid + 1);
  std::vector<cplx> cf(grid.size());
  for (std::size_t k = 0; k <= mid; ++k) {
    cf[mid + k] = half[k];
    cf[mid - k] = std::conj(half[k]);
  }
  cf[mid] = cplx(half[0].real(), 0.0);
  return cf;
}

struct TStar
{
  double value = 0.0;
  std::size_t index = 0; //!< grid index of +t*
  bool saturated = false;
};

//! Smallest positive grid t with |cf(t)| < n^{-1/4}; tMax (saturated) if none.
inline TStar find_t_star(std::span<const cplx> cf, const TGrid& grid, std::size_t n)
{
  if (cf.size() != grid.size())
    throw InvalidArgument("find_t_star: cf and grid sizes differ");
  const double threshold = std::pow(static_cast<double>(n), -0.25);
  for (std::size_t k = grid.mid() + 1; k < grid.size(); ++k)
    if (std::abs(cf[k]) < threshold)
      return {grid[k], k, false};
  return {grid.t_max(), grid.size() - 1, true};
}

struct PhaseEstimate
{
  TGrid grid;
  std::vector<cplx> cf;
  std::vector<cplx> phase;
  std::vector<bool> excluded; //!< |cf| < 1e-12; phase stored as 0
  TStar tStar;
  std::size_t n = 0;

  //! Builds the phase estimate from characteristic-function values.
  static PhaseEstimate from_cf(TGrid grid, std::vector<cplx> cf, std::size_t n)
  {
    if (cf.size() != grid.size())
      throw InvalidArgument("PhaseEstimate: cf and grid sizes differ");
    PhaseEstimate est{std::move(grid), std::move(cf), {}, {}, {}, n};
    est.phase.resize(est.cf.size());
    est.excluded.assign(est.cf.size(), false);
    for (std::size_t k = 0; k < est.cf.size(); ++k) {
      const double r = std::abs(est.cf[k]);
      if (r < 1e-12) {
        est.excluded[k] = true;
        est.phase[k] = 0.0;
      } else {
        est.phase[k] = est.cf[k] / r;
      }
    }
    est.tStar = find_t_star(est.cf, est.grid, n);
    return est;
  }
};

//! Weighted empirical phase function. With q = 1/n this is the plain EPF.
inline PhaseEstimate wepf(const ObservationSet& obs, const TGrid& grid)
{
  return PhaseEstimate::from_cf(grid, weighted_ecf(obs, grid), obs.size());
}

// ---------------------------------------------------------------------------
// Asymptotic variance diagnostics (oracle inputs; test and study use only)
// ---------------------------------------------------------------------------

using CfFunction = std::function<cplx(double)>;
//! phi_{eps_k}(s): characteristic function of the k-th unit error at s.
using ErrorCfFunction = std::function<double(std::size_t, double)>;

struct VarianceProfile
{
  std::vector<double> value;
  std::vector<bool> excluded;
};

namespace detail {

struct VarianceSums
{
  double psi = 0.0;       //!< [sum_k q_k phi_k(sigma_k t)]^2
  double sum_q2 = 0.0;    //!< sum_k q_k^2
  double sum_q2_e2 = 0.0; //!< sum_k q_k^2 phi_k(sigma_k t)^2
  double sum_q2_2t = 0.0; //!< sum_k q_k^2 phi_k(2 sigma_k t)
};

inline VarianceSums variance_sums(const ObservationSet& obs, const ErrorCfFunction& err_cf, double t)
{
  VarianceSums s;
  double lin = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double q = obs.q[k];
    const double e = err_cf(k, obs.sigma[k] * t);
    lin += q * e;
    s.sum_q2 += q * q;
    s.sum_q2_e2 += q * q * e * e;
    s.sum_q2_2t += q * q * err_cf(k, 2.0 * obs.sigma[k] * t);
  }
  s.psi = lin * lin;
  return s;
}

} // namespace detail

//! Asymptotic variance of the WEPF exactly as the closed form of the
//! consistency theorem displays it. Points where phi_X vanishes are excluded.
inline VarianceProfile wepf_asymptotic_variance(const ObservationSet& obs,
                                                const CfFunction& phi_x,
                                                const ErrorCfFunction& err_cf,
                                                std::span<const double> ts)
{
  VarianceProfile out{std::vector<double>(ts.size(), 0.0), std::vector<bool>(ts.size(), false)};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    const cplx px = phi_x(t);
    const double a2 = std::norm(px);
    if (a2 == 0.0) {
      out.excluded[i] = true;
      continue;
    }
    const auto s = detail::variance_sums(obs, err_cf, t);
    // sum_k q_k^2 [1 - |phi_X|^2 phi_k^2 + phi_k^2]
    const double first = (s.sum_q2 - a2 * s.sum_q2_e2 + s.sum_q2_e2) / (2.0 * a2 * s.psi);
    const double cross = (px * px * phi_x(-2.0 * t)).real();
    const double second = cross / (2.0 * a2 * a2 * s.psi) * s.sum_q2_2t;
    out.value[i] = first - second;
  }
  return out;
}

//! First-order (delta method) variance of rho_hat - rho, split into the
//! real and imaginary parts. The deviation is tangent to the unit circle,
//! so total = real + imag with real = Im(rho)^2 total.
struct LinearizedVariance
{
  std::vector<double> total;
  std::vector<double> real;
  std::vector<double> imag;
  std::vector<bool> excluded;
};

inline LinearizedVariance wepf_linearized_variance(const ObservationSet& obs,
                                                   const CfFunction& phi_x,
                                                   const ErrorCfFunction& err_cf,
                                                   std::span<const double> ts)
{
  const std::size_t m = ts.size();
  LinearizedVariance out{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0),
                         std::vector<double>(m, 0.0), std::vector<bool>(m, false)};
  for (std::size_t i = 0; i < m; ++i) {
    const double t = ts[i];
    const cplx px = phi_x(t);
    const double a2 = std::norm(px);
    if (a2 == 0.0) {
      out.excluded[i] = true;
      continue;
    }
    const auto s = detail::variance_sums(obs, err_cf, t);
    const double cross = (px * px * phi_x(-2.0 * t)).real();
    const double v = (s.sum_q2 - cross / a2 * s.sum_q2_2t) / (2.0 * a2 * s.psi);
    const cplx rho = px / std::sqrt(a2);
    out.total[i] = v;
    out.real[i] = rho.imag() * rho.imag() * v;
    out.imag[i] = rho.real() * rho.real() * v;
  }
  return out;
}

} // namespace phasedecon
