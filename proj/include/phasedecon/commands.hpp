#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bandwidth.hpp"
#include "density.hpp"
#include "ecf.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "phasefit.hpp"
#include "simulation.hpp"
#include "weights.hpp"

namespace phasedecon {

//! Exit codes of the command-line front end.
enum ExitCode : int
{
  kExitOk = 0,
  kExitUsage = 1,
  kExitInputError = 2,
  kExitSomeFailed = 3, //!< at most 5% of replicates failed
  kExitManyFailed = 4, //!< more than 5% failed
};

struct DeconvolveOptions
{
  Weighting weighting = Weighting::Wepf;
  std::vector<Estimator> estimators{Estimator::Phase};
  std::optional<double> bandwidth;
  ErrorLaw law = ErrorLaw::Normal; //!< error law assumed by the known-error estimator
  std::size_t tgridCount = TGrid::kDefaultCount;
  std::size_t gridCount = 401;
  std::uint64_t seed = 1;
  FitConfig fit;

  bool uses(Estimator e) const
  {
    return std::find(estimators.begin(), estimators.end(), e) != estimators.end();
  }
};

struct DeconvolveResult
{
  PreparedData prep;
  bool knownVariance = false;
  std::vector<DensityEstimate> estimates; //!< all on the same x grid
};

//! With a sigma column, sigma_i is the error SD of subject i's mean and
//! sigma_X^2 = var(W) - mean(sigma^2); otherwise the variance components
//! are estimated from the replicates (each subject needs at least two).
inline PreparedData prepare_long_data(const LongData& input)
{
  input.data.validate();
  PreparedData prep;
  if (input.sigma) {
    prep.obs = collapse_replicates(input.data, *input.sigma);
    prep.sigmaSq = squared(prep.obs.sigma);
    prep.sigmaXSq = sample_variance(prep.obs.w) - mean(prep.sigmaSq);
  } else {
    const auto vc = estimate_variance_components(input.data);
    prep.obs = collapse_replicates(input.data, vc);
    prep.sigmaSq = vc.sigmaSq;
    prep.sigmaXSq = vc.sigmaXSq;
  }
  prep.sigmaXSq = clamp_sigma_x_sq(prep.sigmaXSq, prep.obs.w);
  return prep;
}

inline DeconvolveResult deconvolve(const LongData& input,
                                   const DeconvolveOptions& opts,
                                   std::optional<std::vector<double>> xs_override = std::nullopt)
{
  DeconvolveResult out;
  out.knownVariance = input.sigma.has_value();
  out.prep = prepare_long_data(input);
  const auto& prep = out.prep;
  const std::size_t n = prep.obs.size();
  const auto xs = xs_override ? *xs_override : default_x_grid(prep.obs.w, opts.gridCount);
  const auto q_opt = mean_optimal_weights(prep.sigmaXSq, prep.sigmaSq);

  if (opts.uses(Estimator::Phase)) {
    const auto grid = TGrid::for_sample(prep.obs.w, opts.tgridCount);
    auto run = [&](std::vector<double> q, Method method) {
      const auto obs = with_weights(prep.obs, std::move(q));
      const auto est = wepf(obs, grid);
      const auto fit = fit_discrete(est, obs, opts.fit, opts.seed);
      const double h = opts.bandwidth ? *opts.bandwidth : select_bandwidth(prep.sigmaXSq, prep.sigmaSq, obs.q).h;
      out.estimates.push_back(invert_to_density(fit.distribution, est, obs, h, xs, method));
    };
    if (opts.weighting != Weighting::Wepf)
      run(equal_weights(n), Method::PhaseEPF);
    if (opts.weighting != Weighting::Epf)
      run(q_opt, Method::PhaseWEPF);
  }
  if (opts.uses(Estimator::KnownError)) {
    const auto obs = with_weights(prep.obs, q_opt);
    const double h = opts.bandwidth ? *opts.bandwidth : select_bandwidth(prep.sigmaXSq, prep.sigmaSq, obs.q).h;
    out.estimates.push_back(known_error_estimator(obs, observation_error_cf(opts.law, obs.sigma), h, xs));
  }
  if (opts.uses(Estimator::Kde))
    out.estimates.push_back(naive_kde(prep.obs.w, normal_reference_bandwidth(prep.obs.w), xs));
  if (out.estimates.empty())
    throw InvalidArgument("deconvolve: no estimator selected");
  return out;
}

namespace detail {

inline std::filesystem::path output_dir(const std::string& dir)
{
  std::filesystem::path p(dir.empty() ? "." : dir);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string to_text(const json& j)
{
  return j.dump(2) + "\n";
}

inline json estimates_json(const std::vector<DensityEstimate>& estimates)
{
  json arr = json::array();
  for (const auto& e : estimates)
    arr.push_back(density_to_json(e));
  return arr;
}

inline std::string density_csv(const std::vector<DensityEstimate>& estimates)
{
  std::ostringstream s;
  write_density_csv(s, estimates);
  return s.str();
}

} // namespace detail

//! Writes replicates.csv and summary.json; the exit code reflects failures.
inline int cmd_simulate(const SimulationConfig& cfg, const std::string& out_dir, std::ostream& log)
{
  const auto study = run_study(cfg);
  const auto dir = detail::output_dir(out_dir);
  std::ostringstream rows;
  write_replicates_csv(rows, study.records);
  write_text((dir / "replicates.csv").string(), rows.str());
  const auto summary = summarize(study);
  write_text((dir / "summary.json").string(), detail::to_text(summary));

  const std::size_t failed = study.failures();
  log << "replicates: " << study.records.size() << ", failed: " << failed << "\n";
  if (!summary["mise_ratio"].is_null())
    log << "phase MISE ratio (EPF/WEPF): " << summary["mise_ratio"].get<double>() << "\n";
  if (failed == 0)
    return kExitOk;
  return 20 * failed > study.records.size() ? kExitManyFailed : kExitSomeFailed;
}

inline int cmd_deconvolve(const std::string& input_path,
                          const DeconvolveOptions& opts,
                          const std::string& out_dir,
                          std::ostream& log)
{
  const auto input = read_long_format(read_csv_file(input_path));
  const auto result = deconvolve(input, opts);
  const auto dir = detail::output_dir(out_dir);
  write_text((dir / "density.csv").string(), detail::density_csv(result.estimates));
  json j;
  j["n"] = result.prep.obs.size();
  j["known_variance"] = result.knownVariance;
  j["sigma_x_sq"] = result.prep.sigmaXSq;
  j["estimates"] = detail::estimates_json(result.estimates);
  write_text((dir / "density.json").string(), detail::to_text(j));
  log << "subjects: " << result.prep.obs.size() << (result.knownVariance ? " (known variances)" : "")
      << ", estimates written to " << dir.string() << "\n";
  return kExitOk;
}

//! W = log(M - 50) for every row; rejects M <= 50 naming the subject.
inline LongData read_log50(const CsvTable& table)
{
  const std::size_t id_col = table.column("id");
  const std::size_t m_col = table.column("M");
  CsvTable transformed = table;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double m = parse_number(table.rows[r][m_col], table.lines[r]);
    if (!(m > 50.0))
      throw InvalidArgument("line " + std::to_string(table.lines[r]) + ": id '" + table.rows[r][id_col] +
                            "' has M <= 50");
    transformed.rows[r][m_col] = format_number(std::log(m - 50.0));
  }
  return read_long_format(transformed, "M", "exam");
}

struct Log50Result
{
  DeconvolveResult y;
  std::vector<DensityEstimate> x;
};

inline Log50Result analyze_log50(const LongData& input, const DeconvolveOptions& opts)
{
  Log50Result out;
  out.y = deconvolve(input, opts);
  const auto& ys = out.y.estimates.front().xs;
  const auto xs = linspace(50.0 + std::exp(ys.front()), 50.0 + std::exp(ys.back()), opts.gridCount);
  for (const auto& e : out.y.estimates) {
    auto back = back_transform_log50(e, xs);
    normalize_density(back.xs, back.fs);
    back.normalized = true;
    out.x.push_back(std::move(back));
  }
  return out;
}

inline int cmd_analyze_log50(const std::string& input_path,
                             const DeconvolveOptions& opts,
                             const std::string& out_dir,
                             std::ostream& log)
{
  const auto input = read_log50(read_csv_file(input_path));
  const auto result = analyze_log50(input, opts);
  const auto dir = detail::output_dir(out_dir);
  write_text((dir / "density_y.csv").string(), detail::density_csv(result.y.estimates));
  write_text((dir / "density.csv").string(), detail::density_csv(result.x));
  json j;
  j["n"] = result.y.prep.obs.size();
  j["sigma_x_sq_y"] = result.y.prep.sigmaXSq;
  j["y_scale"] = detail::estimates_json(result.y.estimates);
  j["x_scale"] = detail::estimates_json(result.x);
  write_text((dir / "density.json").string(), detail::to_text(j));
  log << "subjects: " << result.y.prep.obs.size() << ", X-scale estimates written to " << dir.string() << "\n";
  return kExitOk;
}

inline int cmd_variances(const std::string& input_path, const std::string& out_dir, std::ostream& log)
{
  const auto input = read_long_format(read_csv_file(input_path));
  input.data.validate();
  const auto vc = estimate_variance_components(input.data);
  const auto obs = collapse_replicates(input.data, vc);
  const double clamped = clamp_sigma_x_sq(vc.sigmaXSq, obs.w);
  const auto q = mean_optimal_weights(clamped, vc.sigmaSq);

  std::ostringstream csv;
  csv << "id,n_i,mean,tau_sq,sigma_sq,q_opt\n";
  for (std::size_t i = 0; i < input.data.size(); ++i)
    csv << input.data.id(i) << ',' << vc.counts[i] << ',' << format_number(obs.w[i]) << ','
        << format_number(vc.tauSq[i]) << ',' << format_number(vc.sigmaSq[i]) << ',' << format_number(q[i]) << '\n';
  const auto dir = detail::output_dir(out_dir);
  write_text((dir / "variances.csv").string(), csv.str());
  json j;
  j["n"] = input.data.size();
  j["sigma_x_sq"] = vc.sigmaXSq;
  j["sigma_x_sq_clamped"] = clamped;
  j["mean_sigma_sq"] = mean(vc.sigmaSq);
  write_text((dir / "summary.json").string(), detail::to_text(j));
  log << "subjects: " << input.data.size() << ", sigma_X^2 = " << vc.sigmaXSq << "\n";
  return kExitOk;
}

} // namespace phasedecon
