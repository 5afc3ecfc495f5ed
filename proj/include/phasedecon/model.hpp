#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"
#include "random.hpp"

namespace phasedecon {

// ---------------------------------------------------------------------------
// Target distributions
// ---------------------------------------------------------------------------

enum class Distribution
{
  ScaledChiSq3, //!< chi2(3) / sqrt(6)
  Mixture1,     //!< (0.5 N(1, 1) + 0.5 chi2(5)) / sqrt(9.5)
  Mixture2      //!< (0.5 N(5, 0.6^2) + 0.5 N(2.5, 1)) / sqrt(2.2425)
};

namespace detail {

inline double normal_pdf(double x, double mu, double sd)
{
  const double z = (x - mu) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * kPi));
}

inline double chi_square_pdf(double y, int dof)
{
  if (y <= 0.0)
    return 0.0;
  const double k = 0.5 * dof;
  return std::exp((k - 1.0) * std::log(y) - 0.5 * y - k * std::log(2.0) - std::lgamma(k));
}

//! (1 - 2is)^(-dof/2). 1 - 2is has positive real part, so the principal
//! logarithm is continuous in s and no branch tracking is needed.
inline cplx chi_square_cf(double s, int dof)
{
  const cplx log_base(0.5 * std::log1p(4.0 * s * s), -std::atan(2.0 * s));
  return std::exp(-0.5 * dof * log_base);
}

inline cplx normal_cf(double s, double mu, double var)
{
  return std::exp(cplx(-0.5 * var * s * s, mu * s));
}

} // namespace detail

//! One of the three unit-variance targets used throughout the simulations.
class TrueDensitySpec
{
public:
  explicit TrueDensitySpec(Distribution kind)
    : kind_(kind)
  {}

  Distribution kind() const { return kind_; }

  //! Divisor applied to the unscaled law so that Var(X) = 1.
  double scale() const
  {
    switch (kind_) {
      case Distribution::ScaledChiSq3: return std::sqrt(6.0);
      case Distribution::Mixture1: return std::sqrt(9.5);
      case Distribution::Mixture2: return std::sqrt(2.2425);
    }
    return 1.0;
  }

  double mean() const
  {
    switch (kind_) {
      case Distribution::ScaledChiSq3: return 3.0 / scale();
      case Distribution::Mixture1: return 3.0 / scale();
      case Distribution::Mixture2: return 3.75 / scale();
    }
    return 0.0;
  }

  double variance() const { return 1.0; }

  double density(double x) const
  {
    const double c = scale();
    const double y = c * x;
    switch (kind_) {
      case Distribution::ScaledChiSq3:
        return c * detail::chi_square_pdf(y, 3);
      case Distribution::Mixture1:
        return c * (0.5 * detail::normal_pdf(y, 1.0, 1.0) + 0.5 * detail::chi_square_pdf(y, 5));
      case Distribution::Mixture2:
        return c * (0.5 * detail::normal_pdf(y, 5.0, 0.6) + 0.5 * detail::normal_pdf(y, 2.5, 1.0));
    }
    return 0.0;
  }

  cplx cf(double t) const
  {
    const double s = t / scale();
    switch (kind_) {
      case Distribution::ScaledChiSq3:
        return detail::chi_square_cf(s, 3);
      case Distribution::Mixture1:
        return 0.5 * detail::normal_cf(s, 1.0, 1.0) + 0.5 * detail::chi_square_cf(s, 5);
      case Distribution::Mixture2:
        return 0.5 * detail::normal_cf(s, 5.0, 0.36) + 0.5 * detail::normal_cf(s, 2.5, 1.0);
    }
    return 1.0;
  }

  double sample(Rng& rng) const
  {
    switch (kind_) {
      case Distribution::ScaledChiSq3:
        return rng.chi_square(3) / scale();
      case Distribution::Mixture1: {
        const bool normal_component = rng.uniform() < 0.5;
        return (normal_component ? rng.normal(1.0, 1.0) : rng.chi_square(5)) / scale();
      }
      case Distribution::Mixture2: {
        const bool first = rng.uniform() < 0.5;
        return (first ? rng.normal(5.0, 0.6) : rng.normal(2.5, 1.0)) / scale();
      }
    }
    return 0.0;
  }

  //! Interval carrying all but a negligible amount of mass.
  std::pair<double, double> effective_support() const
  {
    switch (kind_) {
      case Distribution::ScaledChiSq3: return {0.0, 25.0};
      case Distribution::Mixture1: return {-3.0, 15.0};
      case Distribution::Mixture2: return {-2.0, 8.0};
    }
    return {-10.0, 10.0};
  }

private:
  Distribution kind_;
};

// ---------------------------------------------------------------------------
// Measurement error
// ---------------------------------------------------------------------------

enum class ErrorLaw
{
  Normal,
  Laplace
};

//! Variance structures; `Zero` is the noise-free degenerate case.
enum class VarianceCase
{
  Case1,
  Case2,
  Case3,
  Zero
};

//! Characteristic function of a unit-variance error of the given law at s.
inline double error_cf(ErrorLaw law, double s)
{
  return law == ErrorLaw::Normal ? std::exp(-0.5 * s * s) : 1.0 / (1.0 + 0.5 * s * s);
}

struct ErrorSpec
{
  ErrorLaw law = ErrorLaw::Normal;
  VarianceCase varianceCase = VarianceCase::Case1;
  int replicates = 1; //!< J
  double sigmaXSq = 1.0;

  //! sigma_i^2 of the collapsed observation i (0-based index).
  double sigma_sq(std::size_t i, std::size_t n) const
  {
    const double frac = static_cast<double>(i + 1) / static_cast<double>(n);
    switch (varianceCase) {
      case VarianceCase::Case1: return (i < n / 2 ? 0.025 : 0.975) * sigmaXSq;
      case VarianceCase::Case2: return (0.25 + 0.5 * frac) * sigmaXSq;
      case VarianceCase::Case3: return (0.025 + 0.95 * frac) * sigmaXSq;
      case VarianceCase::Zero: return 0.0;
    }
    return 0.0;
  }

  //! Observation-level variance tau_i^2 = J sigma_i^2.
  double tau_sq(std::size_t i, std::size_t n) const
  {
    return static_cast<double>(replicates) * sigma_sq(i, n);
  }

  std::vector<double> sigmas(std::size_t n) const
  {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = std::sqrt(sigma_sq(i, n));
    return out;
  }

  double draw(Rng& rng, double sd) const
  {
    if (sd == 0.0)
      return 0.0;
    return law == ErrorLaw::Normal ? sd * rng.normal() : rng.laplace(sd);
  }
};

// ---------------------------------------------------------------------------
// Data containers
// ---------------------------------------------------------------------------

//! Raw replicate measurements; rows may have unequal lengths.
struct ReplicateDataset
{
  std::vector<std::vector<double>> rows;
  std::vector<std::string> ids;

  std::size_t size() const { return rows.size(); }

  std::size_t total() const
  {
    std::size_t n = 0;
    for (const auto& r : rows)
      n += r.size();
    return n;
  }

  void validate() const
  {
    if (rows.size() < 2)
      throw InvalidArgument("replicate dataset needs at least two observations");
    if (!ids.empty() && ids.size() != rows.size())
      throw InvalidArgument("replicate dataset: ids and rows differ in length");
    for (const auto& r : rows) {
      if (r.empty())
        throw InvalidArgument("replicate dataset: empty row");
      for (double v : r)
        if (!std::isfinite(v))
          throw InvalidArgument("replicate dataset: non-finite value");
    }
  }

  std::string id(std::size_t i) const { return ids.empty() ? std::to_string(i + 1) : ids[i]; }
};

//! Collapsed observations W_i with error SDs and weights q (summing to one).
struct ObservationSet
{
  std::vector<double> w;
  std::vector<double> sigma;
  std::vector<double> q;

  std::size_t size() const { return w.size(); }

  void validate() const
  {
    if (w.empty())
      throw InvalidArgument("observation set is empty");
    if (sigma.size() != w.size() || q.size() != w.size())
      throw InvalidArgument("observation set: w, sigma and q differ in length");
    double total = 0.0;
    for (double v : q) {
      if (!(v >= 0.0))
        throw InvalidArgument("observation set: negative or NaN weight");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw InvalidArgument("observation set: weights do not sum to 1");
  }
};

struct SampledData
{
  ReplicateDataset data;
  std::vector<double> latentX; //!< for oracle scoring only
  std::vector<double> sigma;   //!< true sigma_i of the collapsed observations
};

//! Draws W_ij = X_i + tau_i e_ij. Stream `stream` (e.g. the replicate index)
//! selects an independent RNG stream under the same seed.
inline SampledData sample_dataset(const TrueDensitySpec& spec,
                                  const ErrorSpec& err,
                                  std::size_t n,
                                  std::uint64_t seed,
                                  std::uint64_t stream = 0)
{
  if (n < 2)
    throw InvalidArgument("sample_dataset: n must be at least 2");
  if (err.replicates < 1)
    throw InvalidArgument("sample_dataset: replicate count must be positive");
  if (err.varianceCase == VarianceCase::Case1 && n % 2 != 0)
    throw InvalidArgument("sample_dataset: variance case 1 needs an even n");

  Rng rng(seed, stream);
  SampledData out;
  out.data.rows.resize(n);
  out.data.ids.resize(n);
  out.latentX.resize(n);
  out.sigma = err.sigmas(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = spec.sample(rng);
    const double tau = std::sqrt(err.tau_sq(i, n));
    auto& row = out.data.rows[i];
    row.resize(static_cast<std::size_t>(err.replicates));
    for (auto& v : row)
      v = x + err.draw(rng, tau);
    out.latentX[i] = x;
    out.data.ids[i] = std::to_string(i + 1);
  }
  return out;
}

inline std::vector<double> true_density(const TrueDensitySpec& spec, std::span<const double> xs)
{
  std::vector<double> out(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k)
    out[k] = spec.density(xs[k]);
  return out;
}

struct TruePhase
{
  std::vector<cplx> values;
  std::vector<bool> excluded; //!< |phi_X(t)| below 1e-14
};

inline TruePhase true_phase(const TrueDensitySpec& spec, std::span<const double> ts)
{
  TruePhase out;
  out.values.resize(ts.size());
  out.excluded.assign(ts.size(), false);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const cplx c = spec.cf(ts[k]);
    const double r = std::abs(c);
    if (r < 1e-14) {
      out.excluded[k] = true;
      out.values[k] = 0.0;
    } else {
      out.values[k] = c / r;
    }
  }
  return out;
}

//! Integral of f_X^2, used to close the tail of the exact MISE bias term.
inline double true_density_l2(const TrueDensitySpec& spec)
{
  const auto [lo, hi] = spec.effective_support();
  return simpson([&](double x) { const double f = spec.density(x); return f * f; },
                 lo - 2.0, hi, 400000);
}

inline std::string_view to_string(Distribution d)
{
  switch (d) {
    case Distribution::ScaledChiSq3: return "chisq3";
    case Distribution::Mixture1: return "mixture1";
    case Distribution::Mixture2: return "mixture2";
  }
  return "?";
}

inline std::string_view to_string(ErrorLaw l)
{
  return l == ErrorLaw::Normal ? "normal" : "laplace";
}

inline std::string_view to_string(VarianceCase c)
{
  switch (c) {
    case VarianceCase::Case1: return "1";
    case VarianceCase::Case2: return "2";
    case VarianceCase::Case3: return "3";
    case VarianceCase::Zero: return "0";
  }
  return "?";
}

} // namespace phasedecon
