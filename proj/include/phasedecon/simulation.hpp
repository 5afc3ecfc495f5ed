#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bandwidth.hpp"
#include "density.hpp"
#include "ecf.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "phasefit.hpp"
#include "random.hpp"
#include "weights.hpp"

namespace phasedecon {

enum class Weighting
{
  Epf,
  Wepf,
  Both
};

enum class Estimator
{
  Phase,
  KnownError,
  Kde
};

struct SimulationConfig
{
  Distribution dist = Distribution::ScaledChiSq3;
  ErrorLaw law = ErrorLaw::Normal;
  VarianceCase varianceCase = VarianceCase::Case1;
  std::size_t n = 500;
  int replicates = 1; //!< J
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  Weighting weighting = Weighting::Both;
  bool phaseOnly = false;
  std::vector<Estimator> estimators{Estimator::Phase};
  std::optional<double> bandwidth;
  std::size_t tgridCount = TGrid::kDefaultCount;
  unsigned workers = 1;
  FitConfig fit;

  bool uses(Estimator e) const
  {
    return std::find(estimators.begin(), estimators.end(), e) != estimators.end();
  }
  bool wants_epf() const { return weighting != Weighting::Wepf; }
  bool wants_wepf() const { return weighting != Weighting::Epf; }

  void validate() const
  {
    if (reps < 1)
      throw InvalidArgument("simulation: replications must be at least 1");
    if (replicates < 1)
      throw InvalidArgument("simulation: J must be at least 1");
    if (n < 2)
      throw InvalidArgument("simulation: n must be at least 2");
  }
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

//! One Monte Carlo replicate. Missing values are NaN.
struct ReplicateRecord
{
  std::size_t index = 0;
  bool ok = true;
  std::string error;
  double sigmaXSq = kMissing;
  double tStarEq = kMissing;
  double tStarOpt = kMissing;
  double tStarCommon = kMissing;
  double phaseIseEq = kMissing;
  double phaseIseOpt = kMissing;
  double iseEpf = kMissing;
  double iseWepf = kMissing;
  double iseKnown = kMissing;
  double iseKde = kMissing;
  double hEpf = kMissing;
  double hWepf = kMissing;
  double hKnown = kMissing;
  double hKde = kMissing;
};

struct StudyResult
{
  SimulationConfig config;
  std::vector<ReplicateRecord> records;

  std::size_t failures() const
  {
    return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
  }
};

//! Observations and variance estimates for one dataset, before weighting.
struct PreparedData
{
  ObservationSet obs; //!< q uniform
  double sigmaXSq = 0.0;
  std::vector<double> sigmaSq;
};

//! J = 1: variances known (sigma_X^2 from the moment identity); J >= 2:
//! variance components estimated from the replicates.
inline PreparedData prepare_observations(const SampledData& sample, int replicates)
{
  PreparedData out;
  if (replicates == 1) {
    out.obs = collapse_replicates(sample.data, sample.sigma);
    out.sigmaSq = squared(out.obs.sigma);
    out.sigmaXSq = sample_variance(out.obs.w) - mean(out.sigmaSq);
  } else {
    const auto vc = estimate_variance_components(sample.data);
    out.obs = collapse_replicates(sample.data, vc);
    out.sigmaSq = vc.sigmaSq;
    out.sigmaXSq = vc.sigmaXSq;
  }
  out.sigmaXSq = clamp_sigma_x_sq(out.sigmaXSq, out.obs.w);
  return out;
}

inline ObservationSet with_weights(ObservationSet obs, std::vector<double> q)
{
  obs.q = std::move(q);
  return obs;
}

inline ReplicateRecord run_replicate(const SimulationConfig& cfg, std::size_t index)
{
  ReplicateRecord rec;
  rec.index = index;
  try {
    const TrueDensitySpec spec(cfg.dist);
    const ErrorSpec err{cfg.law, cfg.varianceCase, cfg.replicates, 1.0};
    const auto sample = sample_dataset(spec, err, cfg.n, cfg.seed, index);
    const auto prep = prepare_observations(sample, cfg.replicates);
    rec.sigmaXSq = prep.sigmaXSq;

    const auto obs_eq = with_weights(prep.obs, equal_weights(cfg.n));
    const auto obs_opt = with_weights(prep.obs, mean_optimal_weights(prep.sigmaXSq, prep.sigmaSq));

    const auto grid = TGrid::for_sample(prep.obs.w, cfg.tgridCount);
    const auto truth = true_phase(spec, grid.values());
    std::optional<PhaseEstimate> est_eq;
    std::optional<PhaseEstimate> est_opt;
    if (cfg.wants_epf()) {
      est_eq = wepf(obs_eq, grid);
      rec.tStarEq = est_eq->tStar.value;
    }
    if (cfg.wants_wepf()) {
      est_opt = wepf(obs_opt, grid);
      rec.tStarOpt = est_opt->tStar.value;
    }
    // Both phase ISEs share one interval so the ratio compares like with like.
    rec.tStarCommon = std::fmin(rec.tStarEq, rec.tStarOpt);
    if (est_eq)
      rec.phaseIseEq = phase_ise(*est_eq, truth.values, rec.tStarCommon);
    if (est_opt)
      rec.phaseIseOpt = phase_ise(*est_opt, truth.values, rec.tStarCommon);

    if (cfg.phaseOnly)
      return rec;

    const auto xs = default_x_grid(prep.obs.w);
    const std::uint64_t fit_seed = stream_key(cfg.seed, 0x10000u + index);

    if (cfg.uses(Estimator::Phase)) {
      auto run_phase = [&](const PhaseEstimate& est, const ObservationSet& obs, Method method,
                           double& ise_out, double& h_out) {
        const auto fit = fit_discrete(est, obs, cfg.fit, fit_seed);
        h_out = cfg.bandwidth ? *cfg.bandwidth : select_bandwidth(prep.sigmaXSq, prep.sigmaSq, obs.q).h;
        const auto dens = invert_to_density(fit.distribution, est, obs, h_out, xs, method);
        ise_out = ise(dens, spec);
      };
      if (est_eq)
        run_phase(*est_eq, obs_eq, Method::PhaseEPF, rec.iseEpf, rec.hEpf);
      if (est_opt)
        run_phase(*est_opt, obs_opt, Method::PhaseWEPF, rec.iseWepf, rec.hWepf);
    }

    if (cfg.uses(Estimator::KnownError)) {
      // true error variances and law
      auto obs_true = prep.obs;
      obs_true.sigma = sample.sigma;
      const auto true_sq = squared(sample.sigma);
      obs_true.q = mean_optimal_weights(1.0, true_sq);
      rec.hKnown = cfg.bandwidth ? *cfg.bandwidth : select_bandwidth(1.0, true_sq, obs_true.q).h;
      const auto dens =
        known_error_estimator(obs_true, observation_error_cf(cfg.law, sample.sigma), rec.hKnown, xs);
      rec.iseKnown = ise(dens, spec);
    }

    if (cfg.uses(Estimator::Kde)) {
      rec.hKde = normal_reference_bandwidth(prep.obs.w);
      rec.iseKde = ise(naive_kde(prep.obs.w, rec.hKde, xs), spec);
    }
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

//! Runs all replicates (concurrently up to cfg.workers). Replicate k uses
//! RNG stream k, so results do not depend on scheduling.
inline StudyResult run_study(const SimulationConfig& cfg)
{
  cfg.validate();
  StudyResult out;
  out.config = cfg;
  out.records.resize(cfg.reps);
  parallel_for(cfg.reps, cfg.workers, [&](std::size_t i) { out.records[i] = run_replicate(cfg, i); });
  return out;
}

//! Values of one record field over the successful replicates, skipping NaN.
template <class Field>
std::vector<double> collect(const StudyResult& study, Field field)
{
  std::vector<double> out;
  for (const auto& r : study.records)
    if (r.ok && !std::isnan(r.*field))
      out.push_back(r.*field);
  return out;
}

//! Paired values of two fields over replicates where both are present.
template <class Field>
std::pair<std::vector<double>, std::vector<double>> collect_pairs(const StudyResult& study, Field a, Field b)
{
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& r : study.records)
    if (r.ok && !std::isnan(r.*a) && !std::isnan(r.*b)) {
      out.first.push_back(r.*a);
      out.second.push_back(r.*b);
    }
  return out;
}

} // namespace phasedecon
