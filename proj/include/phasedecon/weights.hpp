#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "numerics.hpp"

namespace phasedecon {

struct VarianceComponents
{
  std::vector<double> tauSq;   //!< per-observation replicate variance
  double sigmaXSq = 0.0;       //!< may be <= 0 in small samples; see clamp_sigma_x_sq
  std::vector<double> sigmaSq; //!< tauSq[i] / counts[i]
  std::vector<std::size_t> counts;
};

//! Moment estimators of tau_i^2, sigma_X^2 and sigma_i^2 from replicates.
inline VarianceComponents estimate_variance_components(const ReplicateDataset& data)
{
  data.validate();
  const std::size_t n = data.size();
  VarianceComponents vc;
  vc.tauSq.resize(n);
  vc.sigmaSq.resize(n);
  vc.counts.resize(n);

  double grand = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = data.rows[i];
    const std::size_t ni = row.size();
    if (ni < 2)
      throw InsufficientReplicates(data.id(i));
    double pair_sum = 0.0;
    for (std::size_t j = 0; j + 1 < ni; ++j)
      for (std::size_t jj = j + 1; jj < ni; ++jj)
        pair_sum += (row[j] - row[jj]) * (row[j] - row[jj]);
    vc.counts[i] = ni;
    vc.tauSq[i] = pair_sum / static_cast<double>(ni * (ni - 1));
    vc.sigmaSq[i] = vc.tauSq[i] / static_cast<double>(ni);
    grand += mean(row);
    total += ni;
  }
  grand /= static_cast<double>(n);

  double ss = 0.0;
  double tau_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : data.rows[i])
      ss += (v - grand) * (v - grand);
    tau_mean += vc.tauSq[i];
  }
  vc.sigmaXSq = ss / static_cast<double>(total) - tau_mean / static_cast<double>(n);
  return vc;
}

//! Individual-level averages with sigma_i = tau_i / sqrt(n_i). Weights are
//! set to 1/n until a weight constructor replaces them.
inline ObservationSet collapse_replicates(const ReplicateDataset& data, const VarianceComponents& vc)
{
  if (vc.sigmaSq.size() != data.size())
    throw InvalidArgument("collapse_replicates: variance components from another dataset");
  ObservationSet obs;
  const std::size_t n = data.size();
  obs.w.resize(n);
  obs.sigma.resize(n);
  obs.q.assign(n, 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    obs.w[i] = mean(data.rows[i]);
    obs.sigma[i] = std::sqrt(vc.sigmaSq[i]);
  }
  return obs;
}

//! Known-variance path: row means with externally supplied sigma_i.
inline ObservationSet collapse_replicates(const ReplicateDataset& data, std::span<const double> sigma)
{
  if (sigma.size() != data.size())
    throw InvalidArgument("collapse_replicates: sigma length does not match the dataset");
  ObservationSet obs;
  const std::size_t n = data.size();
  obs.w.resize(n);
  obs.sigma.assign(sigma.begin(), sigma.end());
  obs.q.assign(n, 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (data.rows[i].empty())
      throw InvalidArgument("collapse_replicates: empty row");
    obs.w[i] = mean(data.rows[i]);
  }
  return obs;
}

inline std::vector<double> equal_weights(std::size_t n)
{
  if (n == 0)
    throw InvalidArgument("equal_weights: n must be positive");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

//! q_i proportional to 1 / (sigma_X^2 + sigma_i^2).
inline std::vector<double> mean_optimal_weights(double sigma_x_sq, std::span<const double> sigma_sq)
{
  if (sigma_sq.empty())
    throw InvalidArgument("mean_optimal_weights: no variances");
  std::vector<double> q(sigma_sq.size());
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double d = sigma_x_sq + sigma_sq[i];
    if (!(d > 0.0) || !std::isfinite(d))
      throw InvalidArgument("mean_optimal_weights: non-positive total variance");
    q[i] = 1.0 / d;
    total += q[i];
  }
  for (auto& v : q)
    v /= total;
  return q;
}

//! Lower bound for sigma_X^2 before building weights: 0.05 times the
//! sample variance of the collapsed observations.
inline double clamp_sigma_x_sq(double sigma_x_sq, std::span<const double> collapsed_w)
{
  return std::max(sigma_x_sq, 0.05 * sample_variance(collapsed_w));
}

inline std::vector<double> squared(std::span<const double> v)
{
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return x * x; });
  return out;
}

} // namespace phasedecon
