#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "ecf.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "numerics.hpp"
#include "random.hpp"

namespace phasedecon {

//! Discrete law with masses p on support points x.
struct DiscreteDistribution
{
  std::vector<double> x;
  std::vector<double> p;

  cplx cf(double t) const
  {
    cplx acc(0.0);
    for (std::size_t j = 0; j < x.size(); ++j)
      if (p[j] != 0.0)
        acc += p[j] * std::polar(1.0, t * x[j]);
    return acc;
  }

  void validate() const
  {
    if (x.empty() || x.size() != p.size())
      throw InvalidArgument("DiscreteDistribution: support and masses differ in length");
    double total = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (!(p[j] >= 0.0))
        throw InvalidArgument("DiscreteDistribution: negative mass");
      if (j > 0 && !(x[j] > x[j - 1]))
        throw InvalidArgument("DiscreteDistribution: support not strictly increasing");
      total += p[j];
    }
    if (std::abs(total - 1.0) > 1e-10)
      throw InvalidArgument("DiscreteDistribution: masses do not sum to 1");
  }
};

struct FitConfig
{
  std::size_t m = 0;       //!< support size; 0 selects ceil(5 sqrt(n))
  double lambda = -1.0;    //!< variance penalty; negative selects the default rule
  std::size_t starts = 8;  //!< uniform start plus (starts - 1) Dirichlet(1) starts
  std::size_t maxIters = 1500;
  double tolGrad = 1e-7;   //!< on the normalized objective
  double tolStep = 1e-12;
  unsigned workers = 1;
};

inline std::size_t default_support_count(std::size_t n)
{
  return static_cast<std::size_t>(std::ceil(5.0 * std::sqrt(static_cast<double>(n))));
}

//! m support points drawn uniformly on [min W, max W], sorted.
inline std::vector<double> build_support(const ObservationSet& obs, std::size_t m, std::uint64_t seed)
{
  if (m < 1)
    throw InvalidArgument("build_support: m must be positive");
  if (obs.size() == 0)
    throw InvalidArgument("build_support: empty observation set");
  const auto [lo_it, hi_it] = std::minmax_element(obs.w.begin(), obs.w.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo))
    throw InvalidArgument("build_support: observations have a degenerate range");
  Rng rng(seed, 0x5u);
  std::vector<double> x(m);
  for (auto& v : x)
    v = rng.uniform(lo, hi);
  std::sort(x.begin(), x.end());
  for (std::size_t j = 1; j < m; ++j)
    if (!(x[j] > x[j - 1]))
      x[j] = std::nextafter(x[j - 1], hi + 1.0);
  return x;
}

inline double variance_v(std::span<const double> p, std::span<const double> x)
{
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    m1 += p[j] * x[j];
    m2 += p[j] * x[j] * x[j];
  }
  return std::max(0.0, m2 - m1 * m1);
}

//! Euclidean projection onto the probability simplex (sort and threshold).
inline std::vector<double> project_to_simplex(std::span<const double> y)
{
  std::vector<double> u(y.begin(), y.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0)
      theta = candidate;
  }
  std::vector<double> p(y.size());
  for (std::size_t j = 0; j < y.size(); ++j)
    p[j] = std::max(0.0, y[j] - theta);
  return p;
}

//! Phase-matching objective T(p) for a fixed support and target WEPF.
//!
//! Evaluated in the division-free form
//!   integral of w~(t) | |psi| phi_hat - |phi_hat| psi |^2 dt
//! over [-t*, t*], where w~ is the Epanechnikov kernel rescaled to that
//! interval. This equals |rho_hat - psi/|psi||^2 omega(t) |phi_hat psi|^2.
//! The integrand is even in t, so only the nodes 0 <= t <= t* are stored.
class PhaseObjective
{
public:
  PhaseObjective(const PhaseEstimate& target, std::span<const double> support)
    : m_(support.size())
  {
    const std::size_t mid = target.grid.mid();
    const std::size_t last = target.tStar.index;
    const double t_star = target.tStar.value;
    const double dt = target.grid.step();
    for (std::size_t k = mid; k < last; ++k) {
      const double t = target.grid[k];
      const double u = t / t_star;
      const double omega = 0.75 * (1.0 - u * u) / t_star;
      const double mult = (k == mid) ? 1.0 : 2.0;
      const double weight = dt * mult * omega;
      if (weight <= 0.0)
        continue;
      t_.push_back(t);
      weight_.push_back(weight);
      target_.push_back(target.cf[k]);
      modulus_.push_back(std::abs(target.cf[k]));
    }
    const std::size_t nodes = t_.size();
    cos_.resize(nodes * m_);
    sin_.resize(nodes * m_);
    for (std::size_t k = 0; k < nodes; ++k)
      for (std::size_t j = 0; j < m_; ++j) {
        const double arg = t_[k] * support[j];
        cos_[k * m_ + j] = std::cos(arg);
        sin_[k * m_ + j] = std::sin(arg);
      }
  }

  std::size_t support_size() const { return m_; }
  std::size_t node_count() const { return t_.size(); }

  double value(std::span<const double> p) const { return evaluate(p, nullptr); }

  //! Returns T(p) and writes dT/dp into grad (size m).
  double value_and_gradient(std::span<const double> p, std::span<double> grad) const
  {
    return evaluate(p, &grad);
  }

private:
  double evaluate(std::span<const double> p, std::span<double>* grad) const
  {
    if (grad)
      std::fill(grad->begin(), grad->end(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < t_.size(); ++k) {
      const double* c = &cos_[k * m_];
      const double* s = &sin_[k * m_];
      double re = 0.0;
      double im = 0.0;
      for (std::size_t j = 0; j < m_; ++j) {
        re += p[j] * c[j];
        im += p[j] * s[j];
      }
      const double r = modulus_[k];
      const double a = target_[k].real();
      const double b = target_[k].imag();
      const double mod = std::sqrt(re * re + im * im);
      const double dot = a * re + b * im; // Re(phi_hat conj(psi))
      total += weight_[k] * (2.0 * r * r * mod * mod - 2.0 * r * mod * dot);
      if (grad) {
        const double coef = 4.0 * r * r - (mod > 0.0 ? 2.0 * r * dot / mod : 0.0);
        const double alpha = weight_[k] * (coef * re - 2.0 * r * mod * a);
        const double beta = weight_[k] * (coef * im - 2.0 * r * mod * b);
        for (std::size_t j = 0; j < m_; ++j)
          (*grad)[j] += alpha * c[j] + beta * s[j];
      }
    }
    return total;
  }

  std::size_t m_;
  std::vector<double> t_;
  std::vector<double> weight_;
  std::vector<cplx> target_;
  std::vector<double> modulus_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

inline double objective_T(std::span<const double> p, std::span<const double> x, const PhaseEstimate& target)
{
  return PhaseObjective(target, x).value(p);
}

//! T(p) + lambda v(p), with gradient.
class PenalizedObjective
{
public:
  PenalizedObjective(const PhaseObjective& phase, std::span<const double> support, double lambda)
    : phase_(phase)
    , x_(support)
    , lambda_(lambda)
  {}

  double value(std::span<const double> p) const
  {
    return phase_.value(p) + lambda_ * raw_variance(p);
  }

  double value_and_gradient(std::span<const double> p, std::span<double> grad) const
  {
    const double t = phase_.value_and_gradient(p, grad);
    double m1 = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j)
      m1 += p[j] * x_[j];
    for (std::size_t j = 0; j < p.size(); ++j)
      grad[j] += lambda_ * (x_[j] * x_[j] - 2.0 * x_[j] * m1);
    return t + lambda_ * raw_variance(p);
  }

  double lambda() const { return lambda_; }

private:
  //! sum p x^2 - (sum p x)^2 without clamping, so the gradient is exact off the simplex.
  double raw_variance(std::span<const double> p) const
  {
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m1 += p[j] * x_[j];
      m2 += p[j] * x_[j] * x_[j];
    }
    return m2 - m1 * m1;
  }

  const PhaseObjective& phase_;
  std::span<const double> x_;
  double lambda_;
};

struct PhaseFit
{
  DiscreteDistribution distribution;
  double objective = 0.0; //!< T + lambda v at the returned masses
  double T = 0.0;
  double v = 0.0;
  double lambda = 0.0;
  std::size_t iterations = 0; //!< of the winning start
  std::size_t bestStart = 0;
};

namespace detail {

struct StartResult
{
  std::vector<double> p;
  double objective = std::numeric_limits<double>::infinity();
  double v = 0.0;
  std::size_t iterations = 0;
};

inline bool better(const StartResult& a, const StartResult& b)
{
  if (a.objective != b.objective)
    return a.objective < b.objective;
  if (a.v != b.v)
    return a.v < b.v;
  return std::lexicographical_compare(a.p.begin(), a.p.end(), b.p.begin(), b.p.end());
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j)
    s += a[j] * b[j];
  return s;
}

//! Spectral projected gradient with monotone Armijo backtracking.
inline StartResult run_projected_gradient(const PenalizedObjective& f,
                                          double scale,
                                          std::vector<double> p,
                                          const FitConfig& cfg)
{
  const std::size_t m = p.size();
  std::vector<double> g(m), g_new(m), trial(m), d(m), y(m);
  double value = f.value_and_gradient(p, g) / scale;
  for (auto& v : g)
    v /= scale;
  double alpha = 1.0;
  std::size_t stalled = 0;
  std::size_t it = 0;
  for (; it < cfg.maxIters; ++it) {
    if (!std::isfinite(value))
      throw NumericalFailure("phase fit: non-finite objective", it, alpha);

    for (std::size_t j = 0; j < m; ++j)
      y[j] = p[j] - g[j];
    const auto unit = project_to_simplex(y);
    double stationarity = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      stationarity = std::max(stationarity, std::abs(unit[j] - p[j]));
    if (stationarity < cfg.tolGrad)
      break;

    for (std::size_t j = 0; j < m; ++j)
      y[j] = p[j] - alpha * g[j];
    const auto projected = project_to_simplex(y);
    for (std::size_t j = 0; j < m; ++j)
      d[j] = projected[j] - p[j];
    const double slope = dot(g, d);
    if (!(slope < 0.0))
      break;

    double step = 1.0;
    double trial_value = 0.0;
    for (;;) {
      for (std::size_t j = 0; j < m; ++j)
        trial[j] = p[j] + step * d[j];
      trial_value = f.value(trial) / scale;
      if (!std::isfinite(trial_value))
        throw NumericalFailure("phase fit: non-finite objective in line search", it, step);
      if (trial_value <= value + 1e-4 * step * slope)
        break;
      step *= 0.5;
      if (step < 1e-14)
        break;
    }
    if (step < 1e-14)
      break;

    f.value_and_gradient(trial, g_new);
    for (auto& v : g_new)
      v /= scale;
    double ss = 0.0;
    double sy = 0.0;
    double max_move = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double sj = trial[j] - p[j];
      const double yj = g_new[j] - g[j];
      ss += sj * sj;
      sy += sj * yj;
      max_move = std::max(max_move, std::abs(sj));
    }
    alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : 1e10;
    const double decrease = value - trial_value;
    p.swap(trial);
    g.swap(g_new);
    value = trial_value;
    stalled = decrease < cfg.tolStep * std::max(1.0, std::abs(value)) ? stalled + 1 : 0;
    if (max_move < cfg.tolStep || stalled >= 10)
      break;
  }
  StartResult out;
  out.objective = value * scale;
  out.p = std::move(p);
  out.iterations = it;
  return out;
}

inline std::vector<double> dirichlet_start(std::size_t m, std::uint64_t seed, std::uint64_t stream)
{
  Rng rng(seed, stream);
  std::vector<double> p(m);
  double total = 0.0;
  for (auto& v : p) {
    v = rng.exponential();
    total += v;
  }
  for (auto& v : p)
    v /= total;
  return p;
}

} // namespace detail

//! Fits masses on the given support so that the phase of their
//! characteristic function matches the target, penalizing the variance.
inline PhaseFit fit_discrete(const PhaseEstimate& target,
                             std::span<const double> support,
                             const FitConfig& cfg,
                             std::uint64_t seed)
{
  const std::size_t m = support.size();
  if (m == 0)
    throw InvalidArgument("fit_discrete: empty support");
  if (cfg.starts == 0 || cfg.maxIters == 0 || !(cfg.tolGrad > 0.0) || !(cfg.tolStep > 0.0))
    throw InvalidArgument("fit_discrete: configuration values must be positive");

  PhaseFit fit;
  fit.distribution.x.assign(support.begin(), support.end());
  if (m == 1) {
    fit.distribution.p = {1.0};
    fit.lambda = std::max(cfg.lambda, 0.0);
    fit.T = objective_T(fit.distribution.p, support, target);
    fit.objective = fit.T;
    return fit;
  }

  const PhaseObjective phase(target, support);
  const std::vector<double> uniform(m, 1.0 / static_cast<double>(m));
  const double t_uniform = phase.value(uniform);
  const double v_uniform = variance_v(uniform, support);
  const double lambda =
    cfg.lambda >= 0.0 ? cfg.lambda : 1e-3 * t_uniform / std::max(v_uniform, 1e-12);
  const PenalizedObjective objective(phase, support, lambda);
  double scale = objective.value(uniform);
  if (!(scale > 0.0) || !std::isfinite(scale))
    scale = 1.0;

  std::vector<detail::StartResult> results(cfg.starts);
  parallel_for(cfg.starts, cfg.workers, [&](std::size_t s) {
    auto start = s == 0 ? uniform : detail::dirichlet_start(m, seed, 0x1000u + s);
    results[s] = detail::run_projected_gradient(objective, scale, std::move(start), cfg);
    results[s].v = variance_v(results[s].p, support);
  });

  std::size_t best = 0;
  for (std::size_t s = 1; s < results.size(); ++s)
    if (detail::better(results[s], results[best]))
      best = s;

  auto p = std::move(results[best].p);
  double total = 0.0;
  for (auto& v : p) {
    if (v < 1e-8)
      v = 0.0;
    total += v;
  }
  for (auto& v : p)
    v /= total;

  fit.distribution.p = std::move(p);
  fit.lambda = lambda;
  fit.T = phase.value(fit.distribution.p);
  fit.v = variance_v(fit.distribution.p, support);
  fit.objective = fit.T + lambda * fit.v;
  fit.iterations = results[best].iterations;
  fit.bestStart = best;
  return fit;
}

//! Support sampled from the observation range with m = cfg.m (or ceil(5 sqrt n)).
inline PhaseFit fit_discrete(const PhaseEstimate& target,
                             const ObservationSet& obs,
                             const FitConfig& cfg,
                             std::uint64_t seed)
{
  const std::size_t m = cfg.m > 0 ? cfg.m : default_support_count(obs.size());
  const auto support = build_support(obs, m, seed);
  return fit_discrete(target, support, cfg, seed);
}

} // namespace phasedecon
