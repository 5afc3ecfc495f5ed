#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ecf.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "numerics.hpp"
#include "phasefit.hpp"

namespace phasedecon {

enum class Method
{
  PhaseEPF,
  PhaseWEPF,
  KnownErrorBaseline,
  NaiveKDE
};

inline std::string_view to_string(Method m)
{
  switch (m) {
    case Method::PhaseEPF: return "phase_epf";
    case Method::PhaseWEPF: return "phase_wepf";
    case Method::KnownErrorBaseline: return "known_error";
    case Method::NaiveKDE: return "kde";
  }
  return "?";
}

struct DensityEstimate
{
  std::vector<double> xs;
  std::vector<double> fs;
  double bandwidth = 0.0;
  Method method = Method::PhaseWEPF;
  std::optional<double> tStar;
  bool normalized = false;
  std::size_t clampCount = 0; //!< denominator clamps (known-error estimator only)
};

struct InversionOptions
{
  std::size_t nodesPerSegment = 1025;
  bool postprocess = true; //!< truncate negative values and renormalize
};

//! Fourier transform of the deconvolution kernel, (1 - (ht)^2)^3 on |ht| <= 1.
inline double kernel_ft(double t, double h)
{
  const double u = h * t;
  if (std::abs(u) > 1.0)
    return 0.0;
  const double v = 1.0 - u * u;
  return v * v * v;
}

//! sigma_L^2 = sum_j q_j sigma_j^2.
inline double laplace_ridge_variance(const ObservationSet& obs)
{
  double s = 0.0;
  for (std::size_t j = 0; j < obs.size(); ++j)
    s += obs.q[j] * obs.sigma[j] * obs.sigma[j];
  return s;
}

//! Fitted discrete cf inside [-t*, t*], ridged empirical cf outside.
inline cplx ridged_cf(const DiscreteDistribution& fit,
                      const PhaseEstimate& est,
                      const ObservationSet& obs,
                      double t)
{
  if (std::abs(t) <= est.tStar.value)
    return fit.cf(t);
  const double sigma_l_sq = laplace_ridge_variance(obs);
  return weighted_ecf_at(obs, t) * (1.0 + 0.5 * sigma_l_sq * t * t);
}

//! 401 points on [min W - 2 sd, max W + 2 sd].
inline std::vector<double> default_x_grid(std::span<const double> w, std::size_t count = 401)
{
  if (w.empty())
    throw InvalidArgument("default_x_grid: no observations");
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  const double sd = std::sqrt(sample_variance(w));
  return linspace(*lo - 2.0 * sd, *hi + 2.0 * sd, count);
}

//! Truncates negative values to zero and rescales to unit trapezoid mass.
inline void normalize_density(std::span<const double> xs, std::span<double> fs)
{
  for (auto& f : fs) {
    if (!std::isfinite(f))
      throw NumericalFailure("density estimate is not finite");
    f = std::max(f, 0.0);
  }
  const double mass = trapezoid(xs, std::span<const double>(fs.data(), fs.size()));
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw NumericalFailure("density estimate has no positive mass");
  for (auto& f : fs)
    f /= mass;
}

namespace detail {

//! Equally spaced nodes on [a, b] with pre-multiplied trapezoid weights and
//! the values of (smoothed cf) at each node.
struct InversionSegment
{
  double a = 0.0;
  double dt = 0.0;
  std::vector<cplx> weighted; //!< trapezoid weight * phi_tilde(t) * K(ht)
};

inline InversionSegment make_segment(double a, double b, std::size_t nodes)
{
  InversionSegment seg;
  seg.a = a;
  seg.dt = (b - a) / static_cast<double>(nodes - 1);
  seg.weighted.assign(nodes, cplx(0.0));
  return seg;
}

inline double trapezoid_weight(std::size_t k, std::size_t nodes, double dt)
{
  return (k == 0 || k + 1 == nodes) ? 0.5 * dt : dt;
}

//! f(x) = (1/pi) integral over t >= 0 of Re(exp(-itx) phi_tilde(t)) K(ht) dt.
inline std::vector<double> invert_segments(std::span<const InversionSegment> segments,
                                           std::span<const double> xs)
{
  std::vector<double> fs(xs.size(), 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double acc = 0.0;
    for (const auto& seg : segments)
      sweep_phasors(seg.a, seg.dt, seg.weighted.size(), xs[i], [&](std::size_t k, cplx z) {
        acc += seg.weighted[k].real() * z.real() + seg.weighted[k].imag() * z.imag();
      });
    fs[i] = acc / kPi;
    if (!std::isfinite(fs[i]))
      throw NumericalFailure("Fourier inversion produced a non-finite value");
  }
  return fs;
}

inline std::vector<cplx> discrete_cf_sweep(const DiscreteDistribution& d,
                                           double t0,
                                           double dt,
                                           std::size_t count)
{
  std::vector<cplx> acc(count, cplx(0.0));
  for (std::size_t j = 0; j < d.x.size(); ++j) {
    const double p = d.p[j];
    if (p == 0.0)
      continue;
    sweep_phasors(t0, dt, count, d.x[j], [&](std::size_t k, cplx z) { acc[k] += p * z; });
  }
  return acc;
}

inline DensityEstimate finish(std::vector<double> xs,
                              std::vector<double> fs,
                              double h,
                              Method method,
                              const InversionOptions& opts)
{
  DensityEstimate out;
  out.xs = std::move(xs);
  out.fs = std::move(fs);
  out.bandwidth = h;
  out.method = method;
  if (opts.postprocess) {
    normalize_density(out.xs, out.fs);
    out.normalized = true;
  }
  return out;
}

inline void check_bandwidth(double h)
{
  if (!(h > 0.0) || !std::isfinite(h))
    throw InvalidArgument("bandwidth must be positive and finite");
}

} // namespace detail

//! Phase-function deconvolution estimate: the fitted discrete cf on
//! [0, t*] and the Laplace-ridged empirical cf beyond, smoothed by K(ht)
//! and inverted by the trapezoid rule on [0, 1/h] (split at t*).
inline DensityEstimate invert_to_density(const DiscreteDistribution& fit,
                                         const PhaseEstimate& est,
                                         const ObservationSet& obs,
                                         double h,
                                         std::span<const double> xs,
                                         Method method = Method::PhaseWEPF,
                                         const InversionOptions& opts = {})
{
  detail::check_bandwidth(h);
  const double t_max = 1.0 / h;
  const double t_star = est.tStar.value;
  const std::size_t nodes = std::max<std::size_t>(opts.nodesPerSegment, 3);
  std::vector<detail::InversionSegment> segments;

  const double fit_end = std::min(t_star, t_max);
  {
    auto seg = detail::make_segment(0.0, fit_end, nodes);
    const auto psi = detail::discrete_cf_sweep(fit, 0.0, seg.dt, nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
      const double t = seg.dt * static_cast<double>(k);
      seg.weighted[k] = detail::trapezoid_weight(k, nodes, seg.dt) * psi[k] * kernel_ft(t, h);
    }
    segments.push_back(std::move(seg));
  }
  if (t_star < t_max) {
    const double sigma_l_sq = laplace_ridge_variance(obs);
    auto seg = detail::make_segment(t_star, t_max, nodes);
    const auto cf = weighted_ecf_sweep(obs, t_star, seg.dt, nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
      const double t = t_star + seg.dt * static_cast<double>(k);
      const double ridge = 1.0 + 0.5 * sigma_l_sq * t * t;
      seg.weighted[k] = detail::trapezoid_weight(k, nodes, seg.dt) * cf[k] * ridge * kernel_ft(t, h);
    }
    segments.push_back(std::move(seg));
  }

  auto fs = detail::invert_segments(segments, xs);
  auto out = detail::finish({xs.begin(), xs.end()}, std::move(fs), h, method, opts);
  out.tStar = t_star;
  return out;
}

//! Inversion of the smoothed weighted empirical cf (no fit, no ridge).
//! With noise-free data this is an ordinary kernel density estimate.
inline DensityEstimate invert_smoothed_ecf(const ObservationSet& obs,
                                           double h,
                                           std::span<const double> xs,
                                           const InversionOptions& opts = {})
{
  detail::check_bandwidth(h);
  const std::size_t nodes = std::max<std::size_t>(opts.nodesPerSegment, 3);
  auto seg = detail::make_segment(0.0, 1.0 / h, nodes);
  const auto cf = weighted_ecf_sweep(obs, 0.0, seg.dt, nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = seg.dt * static_cast<double>(k);
    seg.weighted[k] = detail::trapezoid_weight(k, nodes, seg.dt) * cf[k] * kernel_ft(t, h);
  }
  std::vector<detail::InversionSegment> segments{std::move(seg)};
  auto fs = detail::invert_segments(segments, xs);
  return detail::finish({xs.begin(), xs.end()}, std::move(fs), h, Method::PhaseWEPF, opts);
}

//! (j, t) -> phi_{eps_j}(sigma_j t).
using ObservationErrorCf = std::function<double(std::size_t, double)>;

inline ObservationErrorCf observation_error_cf(ErrorLaw law, std::vector<double> sigma)
{
  return [law, sigma = std::move(sigma)](std::size_t j, double t) {
    return error_cf(law, sigma[j] * t);
  };
}

//! Weighted heteroscedastic deconvolution estimator with known error cfs:
//! the smoothed weighted ecf divided by sum_j q_j phi_{eps_j}(sigma_j t).
//! Denominators below 1e-8 are clamped and counted in clampCount.
inline DensityEstimate known_error_estimator(const ObservationSet& obs,
                                             const ObservationErrorCf& err_cf,
                                             double h,
                                             std::span<const double> xs,
                                             const InversionOptions& opts = {})
{
  detail::check_bandwidth(h);
  obs.validate();
  constexpr double kFloor = 1e-8;
  const std::size_t nodes = std::max<std::size_t>(opts.nodesPerSegment, 3);
  auto seg = detail::make_segment(0.0, 1.0 / h, nodes);
  const auto cf = weighted_ecf_sweep(obs, 0.0, seg.dt, nodes);
  std::size_t clamps = 0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = seg.dt * static_cast<double>(k);
    double denom = 0.0;
    for (std::size_t j = 0; j < obs.size(); ++j)
      denom += obs.q[j] * err_cf(j, t);
    if (denom < kFloor) {
      denom = kFloor;
      ++clamps;
    }
    seg.weighted[k] = detail::trapezoid_weight(k, nodes, seg.dt) * cf[k] * (kernel_ft(t, h) / denom);
  }
  std::vector<detail::InversionSegment> segments{std::move(seg)};
  auto fs = detail::invert_segments(segments, xs);
  auto out = detail::finish({xs.begin(), xs.end()}, std::move(fs), h, Method::KnownErrorBaseline, opts);
  out.clampCount = clamps;
  return out;
}

//! Normal-reference bandwidth for a Gaussian kernel, (4/3)^{1/5} sd n^{-1/5}.
inline double normal_reference_bandwidth(std::span<const double> w)
{
  const double sd = std::sqrt(sample_variance(w));
  return std::pow(4.0 / 3.0, 0.2) * sd * std::pow(static_cast<double>(w.size()), -0.2);
}

//! Gaussian kernel density estimate that ignores measurement error.
inline DensityEstimate naive_kde(std::span<const double> w, double h, std::span<const double> xs)
{
  detail::check_bandwidth(h);
  if (w.empty())
    throw InvalidArgument("naive_kde: no observations");
  DensityEstimate out;
  out.xs.assign(xs.begin(), xs.end());
  out.fs.assign(xs.size(), 0.0);
  out.bandwidth = h;
  out.method = Method::NaiveKDE;
  const double norm = 1.0 / (static_cast<double>(w.size()) * h * std::sqrt(2.0 * kPi));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double acc = 0.0;
    for (double v : w) {
      const double z = (xs[i] - v) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out.fs[i] = acc * norm;
  }
  normalize_density(out.xs, out.fs);
  out.normalized = true;
  return out;
}

//! Density of X = 50 + exp(Y) from a density estimate on the Y scale:
//! f_X(x) = f_Y(log(x - 50)) / (x - 50), with f_Y linearly interpolated.
inline DensityEstimate back_transform_log50(const DensityEstimate& est_y, std::span<const double> xs)
{
  DensityEstimate out;
  out.xs.assign(xs.begin(), xs.end());
  out.fs.resize(xs.size());
  out.bandwidth = est_y.bandwidth;
  out.method = est_y.method;
  out.tStar = est_y.tStar;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double shifted = xs[i] - 50.0;
    if (!(shifted > 0.0))
      throw InvalidArgument("back_transform_log50: grid values must exceed 50");
    out.fs[i] = interpolate_linear(est_y.xs, est_y.fs, std::log(shifted)) / shifted;
  }
  return out;
}

} // namespace phasedecon
