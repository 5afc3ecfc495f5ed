// Command-line front end: simulate, deconvolve, analyze-log50, variances.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <phasedecon/phasedecon.hpp>

namespace pd = phasedecon;

namespace {

struct Options
{
  std::string dist = "chisq3";
  std::string error = "normal";
  std::string varianceCase = "1";
  std::size_t n = 500;
  int J = 1;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  std::string weights = "both";
  std::vector<std::string> estimators{"phase"};
  std::string bandwidth = "auto";
  std::string out = ".";
  unsigned workers = 1;
  std::size_t tgrid = pd::TGrid::kDefaultCount;
  bool phaseOnly = false;
  std::string input;
};

const std::map<std::string, pd::Distribution> kDists{{"chisq3", pd::Distribution::ScaledChiSq3},
                                                     {"mixture1", pd::Distribution::Mixture1},
                                                     {"mixture2", pd::Distribution::Mixture2}};
const std::map<std::string, pd::ErrorLaw> kLaws{{"normal", pd::ErrorLaw::Normal},
                                                {"laplace", pd::ErrorLaw::Laplace}};
const std::map<std::string, pd::VarianceCase> kCases{{"1", pd::VarianceCase::Case1},
                                                     {"2", pd::VarianceCase::Case2},
                                                     {"3", pd::VarianceCase::Case3},
                                                     {"0", pd::VarianceCase::Zero}};
const std::map<std::string, pd::Weighting> kWeights{{"epf", pd::Weighting::Epf},
                                                    {"wepf", pd::Weighting::Wepf},
                                                    {"both", pd::Weighting::Both}};
const std::map<std::string, pd::Estimator> kEstimators{{"phase", pd::Estimator::Phase},
                                                       {"known-error", pd::Estimator::KnownError},
                                                       {"kde", pd::Estimator::Kde}};

std::optional<double> parse_bandwidth(const std::string& s)
{
  if (s == "auto")
    return std::nullopt;
  std::size_t used = 0;
  const double h = std::stod(s, &used);
  if (used != s.size() || !(h > 0.0))
    throw pd::InvalidArgument("--bandwidth must be 'auto' or a positive number");
  return h;
}

std::vector<pd::Estimator> parse_estimators(const std::vector<std::string>& names)
{
  std::vector<pd::Estimator> out;
  for (const auto& s : names)
    out.push_back(kEstimators.at(s));
  return out;
}

pd::DeconvolveOptions deconvolve_options(const Options& o)
{
  pd::DeconvolveOptions d;
  d.weighting = kWeights.at(o.weights);
  d.estimators = parse_estimators(o.estimators);
  d.bandwidth = parse_bandwidth(o.bandwidth);
  d.law = kLaws.at(o.error);
  d.tgridCount = o.tgrid;
  d.seed = o.seed;
  return d;
}

template <class Map>
auto choices(const Map& m)
{
  std::vector<std::string> keys;
  for (const auto& [k, v] : m)
    keys.push_back(k);
  return CLI::IsMember(keys);
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Phase-function density deconvolution for heteroscedastic measurement error"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Base RNG seed");
    sub->add_option("--weights", o.weights, "Weighting of the phase estimator")->check(choices(kWeights));
    sub->add_option("--estimator", o.estimators, "Estimators to compute")->check(choices(kEstimators));
    sub->add_option("--bandwidth", o.bandwidth, "Bandwidth h, or 'auto' for the AMISE rule");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--tgrid", o.tgrid, "Points on the frequency grid (odd)");
    sub->add_option("--error", o.error, "Error law")->check(choices(kLaws));
  };

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study for one configuration");
  add_common(simulate);
  simulate->add_option("--dist", o.dist, "True density")->check(choices(kDists));
  simulate->add_option("--case", o.varianceCase, "Error variance structure")->check(choices(kCases));
  simulate->add_option("--n", o.n, "Sample size");
  simulate->add_option("--J", o.J, "Replicates per subject");
  simulate->add_option("--reps", o.reps, "Monte Carlo replications");
  simulate->add_option("--workers", o.workers, "Concurrent replicates");
  simulate->add_flag("--phase-only", o.phaseOnly, "Skip fitting and density estimation");

  auto* deconv = app.add_subcommand("deconvolve", "Density estimate from a long-format CSV (id, rep, value[, sigma])");
  add_common(deconv);
  deconv->add_option("input", o.input, "Input CSV")->required();

  auto* log50 = app.add_subcommand("analyze-log50", "Deconvolution on log(M - 50) with an X-scale back-transform");
  add_common(log50);
  log50->add_option("input", o.input, "Input CSV (id, exam, M)")->required();

  auto* variances = app.add_subcommand("variances", "Variance components and weights from replicates");
  variances->add_option("input", o.input, "Input CSV (id, rep, value)")->required();
  variances->add_option("--out", o.out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      pd::SimulationConfig cfg;
      cfg.dist = kDists.at(o.dist);
      cfg.law = kLaws.at(o.error);
      cfg.varianceCase = kCases.at(o.varianceCase);
      cfg.n = o.n;
      cfg.replicates = o.J;
      cfg.reps = o.reps;
      cfg.seed = o.seed;
      cfg.weighting = kWeights.at(o.weights);
      cfg.phaseOnly = o.phaseOnly;
      cfg.estimators = parse_estimators(o.estimators);
      cfg.bandwidth = parse_bandwidth(o.bandwidth);
      cfg.tgridCount = o.tgrid;
      cfg.workers = o.workers;
      return pd::cmd_simulate(cfg, o.out, std::cout);
    }
    if (deconv->parsed())
      return pd::cmd_deconvolve(o.input, deconvolve_options(o), o.out, std::cout);
    if (log50->parsed())
      return pd::cmd_analyze_log50(o.input, deconvolve_options(o), o.out, std::cout);
    if (variances->parsed())
      return pd::cmd_variances(o.input, o.out, std::cout);
  } catch (const pd::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return pd::kExitInputError;
  } catch (const pd::InsufficientReplicates& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pd::kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pd::kExitUsage;
  }
  return pd::kExitUsage;
}
