#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include <gtest/gtest.h>

#include <phasedecon/bandwidth.hpp>
#include <phasedecon/density.hpp>
#include <phasedecon/metrics.hpp>
#include <phasedecon/phasefit.hpp>
#include <phasedecon/simulation.hpp>
#include <phasedecon/weights.hpp>

using namespace phasedecon;

namespace {

ObservationSet make_obs(std::vector<double> w, double sigma)
{
  ObservationSet obs;
  obs.sigma.assign(w.size(), sigma);
  obs.q = equal_weights(w.size());
  obs.w = std::move(w);
  return obs;
}

std::vector<double> draw(Distribution d, std::size_t n, double sigma, std::uint64_t seed)
{
  const TrueDensitySpec spec(d);
  Rng rng(seed);
  std::vector<double> w(n);
  for (auto& v : w)
    v = spec.sample(rng) + sigma * rng.normal();
  return w;
}

//! Kernel whose Fourier transform is (1 - u^2)^3, by independent quadrature.
double kernel(double z)
{
  return simpson([z](double u) { const double v = 1.0 - u * u; return std::cos(u * z) * v * v * v; }, 0.0, 1.0, 4000) /
         kPi;
}

std::vector<double> direct_kde(const std::vector<double>& w, double h, const std::vector<double>& xs)
{
  std::vector<double> out(xs.size(), 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (double v : w)
      out[i] += kernel((xs[i] - v) / h);
    out[i] /= static_cast<double>(w.size()) * h;
  }
  return out;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

void expect_proper_density(const DensityEstimate& e)
{
  for (double f : e.fs) {
    EXPECT_TRUE(std::isfinite(f));
    EXPECT_GE(f, 0.0);
  }
  EXPECT_NEAR(trapezoid(e.xs, e.fs), 1.0, 1e-3);
}

} // namespace

TEST(Kernel, FourierTransformValues)
{
  EXPECT_EQ(kernel_ft(0.0, 0.3), 1.0);
  EXPECT_EQ(kernel_ft(1.0 / 0.3, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(kernel_ft(0.5, 1.0), 0.421875);
  EXPECT_EQ(kernel_ft(5.0, 1.0), 0.0);
}

TEST(Ridge, OriginAndZeroVariance)
{
  const auto obs = make_obs(draw(Distribution::ScaledChiSq3, 100, 0.0, 1), 0.0);
  const auto est = wepf(obs, TGrid::for_sample(obs.w));
  const DiscreteDistribution fit{{0.0, 1.0}, {0.5, 0.5}};
  EXPECT_NEAR(std::abs(ridged_cf(fit, est, obs, 0.0) - cplx(1.0, 0.0)), 0.0, 1e-15);
  EXPECT_EQ(laplace_ridge_variance(obs), 0.0);
  const double t = est.tStar.value * 1.5;
  EXPECT_NEAR(std::abs(ridged_cf(fit, est, obs, t) - weighted_ecf_at(obs, t)), 0.0, 1e-15);
}

TEST(Ridge, ContinuousAtCutoffOnWellFitInstance)
{
  // five-point law observed exactly: weights carry the masses
  ObservationSet obs;
  obs.w = {-2.0, -0.5, 0.75, 1.5, 3.0};
  obs.q = {0.15, 0.3, 0.25, 0.2, 0.1};
  obs.sigma.assign(5, 0.0);
  const TGrid g(8.0, 513);
  const DiscreteDistribution truth{obs.w, obs.q};
  std::vector<cplx> cf(g.size());
  for (std::size_t k = 0; k < g.size(); ++k)
    cf[k] = truth.cf(g[k]);
  // n = 10^4 puts the threshold at 0.1, first crossed near t = 1.36
  const auto est = PhaseEstimate::from_cf(g, std::move(cf), 10000);
  ASSERT_FALSE(est.tStar.saturated);
  const std::vector<double> support{-2.5, -2.0, -1.2, -0.5, 0.1, 0.75, 1.1, 1.5, 2.2, 3.0, 3.6};
  const auto fit = fit_discrete(est, support, FitConfig{}, 3);
  const double ts = est.tStar.value;
  const double gap = std::abs(ridged_cf(fit.distribution, est, obs, ts) -
                              ridged_cf(fit.distribution, est, obs, std::nextafter(ts, 1e9)));
  std::cout << "branch gap at t* = " << est.tStar.value << ": " << gap << '\n';
  EXPECT_LT(gap, 0.1);
}

TEST(Inversion, NoiseFreeSmoothedEcfIsAKernelDensityEstimate)
{
  const auto w = draw(Distribution::Mixture2, 60, 0.0, 2);
  const auto obs = make_obs(w, 0.0);
  const auto xs = linspace(-2.0, 6.0, 81);
  for (double h : {0.2, 0.5}) {
    const auto est = invert_smoothed_ecf(obs, h, xs, {1025, false});
    EXPECT_LT(sup_diff(est.fs, direct_kde(w, h, xs)), 1e-6) << "h=" << h;
    const auto known = known_error_estimator(obs, observation_error_cf(ErrorLaw::Normal, obs.sigma), h, xs,
                                             {1025, false});
    EXPECT_LT(sup_diff(known.fs, direct_kde(w, h, xs)), 1e-6) << "h=" << h;
    EXPECT_EQ(known.clampCount, 0u);
  }
}

TEST(Inversion, PhaseEstimateIsAProperDensity)
{
  const auto obs = make_obs(draw(Distribution::ScaledChiSq3, 400, 0.6, 3), 0.6);
  const auto est = wepf(obs, TGrid::for_sample(obs.w));
  const auto fit = fit_discrete(est, obs, FitConfig{}, 9);
  const auto h = select_bandwidth(1.0, std::vector<double>(400, 0.36), obs.q).h;
  const auto dens = invert_to_density(fit.distribution, est, obs, h, default_x_grid(obs.w));
  EXPECT_TRUE(dens.normalized);
  ASSERT_TRUE(dens.tStar.has_value());
  EXPECT_EQ(*dens.tStar, est.tStar.value);
  expect_proper_density(dens);
}

TEST(Inversion, PointMassConcentratesAtItsLocation)
{
  ObservationSet obs = make_obs({0.7}, 0.0);
  const auto est = wepf(obs, TGrid(100.0, 1025));
  const DiscreteDistribution fit{{0.7}, {1.0}};
  const auto xs = linspace(-3.0, 3.0, 601);
  const auto dens = invert_to_density(fit, est, obs, 0.05, xs);
  const auto peak = std::max_element(dens.fs.begin(), dens.fs.end()) - dens.fs.begin();
  EXPECT_LE(std::abs(xs[static_cast<std::size_t>(peak)] - 0.7), xs[1] - xs[0] + 1e-12);
}

TEST(Inversion, TranslationEquivariant)
{
  const auto w = draw(Distribution::Mixture1, 200, 0.4, 4);
  auto obs = make_obs(w, 0.4);
  const auto grid = TGrid::for_sample(obs.w);
  const auto est = wepf(obs, grid);
  const DiscreteDistribution fit{{-1.0, 0.0, 0.8, 2.0}, {0.2, 0.3, 0.4, 0.1}};
  const auto xs = linspace(-3.0, 5.0, 161);
  const auto a = invert_to_density(fit, est, obs, 0.3, xs, Method::PhaseWEPF, {1025, false});

  const double c = 1.75;
  for (auto& v : obs.w)
    v += c;
  DiscreteDistribution moved = fit;
  for (auto& v : moved.x)
    v += c;
  std::vector<double> xs_moved(xs);
  for (auto& v : xs_moved)
    v += c;
  const auto b = invert_to_density(moved, wepf(obs, grid), obs, 0.3, xs_moved, Method::PhaseWEPF, {1025, false});
  EXPECT_LT(sup_diff(a.fs, b.fs), 1e-8);
}

TEST(Inversion, SpreadGrowsWithBandwidth)
{
  const auto w = draw(Distribution::ScaledChiSq3, 300, 0.0, 5);
  const auto obs = make_obs(w, 0.0);
  const auto xs = linspace(-30.0, 30.0, 1201);
  double prev = 0.0;
  for (double h : {0.1, 0.3, 1.0, 3.0, 10.0, 1000.0}) {
    const auto e = invert_smoothed_ecf(obs, h, xs);
    double m1 = 0.0;
    double m2 = 0.0;
    std::vector<double> x1(xs.size()), x2(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      x1[i] = xs[i] * e.fs[i];
      x2[i] = xs[i] * xs[i] * e.fs[i];
    }
    m1 = trapezoid(xs, x1);
    m2 = trapezoid(xs, x2);
    const double var = m2 - m1 * m1;
    EXPECT_GT(var, prev) << "h=" << h;
    prev = var;
  }
}

TEST(Inversion, NonFiniteDataRaisesNumericalFailure)
{
  auto obs = make_obs({0.0, 1.0, std::numeric_limits<double>::quiet_NaN()}, 0.0);
  EXPECT_THROW(invert_smoothed_ecf(obs, 0.5, linspace(-1.0, 2.0, 11)), NumericalFailure);
  EXPECT_THROW(invert_smoothed_ecf(make_obs({0.0, 1.0}, 0.0), -1.0, linspace(-1.0, 2.0, 11)), InvalidArgument);
}

TEST(KnownError, MatchesTextbookHomoscedasticEstimator)
{
  const auto w = draw(Distribution::ScaledChiSq3, 50, 0.2, 6);
  const auto obs = make_obs(w, 0.2);
  const double h = 0.5;
  const double sigma = 0.2;
  const auto xs = linspace(-1.0, 4.0, 41);
  const auto est = known_error_estimator(obs, observation_error_cf(ErrorLaw::Normal, obs.sigma), h, xs, {1025, false});
  // classical deconvoluting kernel K_U(z) = pi^{-1} int_0^1 cos(uz) K^ft(u) / phi_U(u/h) du
  auto deconv_kernel = [&](double z) {
    return simpson(
             [&](double u) {
               const double v = 1.0 - u * u;
               const double s = sigma * u / h;
               return std::cos(u * z) * v * v * v * std::exp(0.5 * s * s);
             },
             0.0, 1.0, 20000) /
           kPi;
  };
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double f = 0.0;
    for (double v : w)
      f += deconv_kernel((xs[i] - v) / h);
    f /= 50.0 * h;
    EXPECT_NEAR(est.fs[i], f, 1e-8) << "x=" << xs[i];
  }
}

TEST(KnownError, LaplaceErrorsNeverClamp)
{
  auto obs = make_obs(draw(Distribution::Mixture1, 300, 1.0, 7), 1.0);
  for (std::size_t i = 0; i < obs.size(); ++i)
    obs.sigma[i] = 0.3 + 2.0 * static_cast<double>(i) / 300.0;
  obs.q = mean_optimal_weights(1.0, squared(obs.sigma));
  const auto est = known_error_estimator(obs, observation_error_cf(ErrorLaw::Laplace, obs.sigma), 0.05,
                                         default_x_grid(obs.w));
  EXPECT_EQ(est.clampCount, 0u);
  expect_proper_density(est);
}

TEST(KnownError, NormalErrorsClampTinyDenominators)
{
  const auto obs = make_obs(draw(Distribution::Mixture1, 100, 1.0, 8), 1.0);
  const auto est = known_error_estimator(obs, observation_error_cf(ErrorLaw::Normal, obs.sigma), 0.1,
                                         default_x_grid(obs.w));
  EXPECT_GT(est.clampCount, 0u);
  expect_proper_density(est);
}

TEST(KnownError, BeatsNaiveKdeOnContaminatedData)
{
  const TrueDensitySpec spec(Distribution::ScaledChiSq3);
  const ErrorSpec err{ErrorLaw::Normal, VarianceCase::Case1, 1};
  std::vector<double> known;
  std::vector<double> naive;
  for (std::uint64_t r = 0; r < 50; ++r) {
    const auto s = sample_dataset(spec, err, 500, 404, r);
    auto obs = collapse_replicates(s.data, s.sigma);
    const auto s2 = squared(s.sigma);
    obs.q = mean_optimal_weights(1.0, s2);
    const auto xs = default_x_grid(obs.w);
    const double h = select_bandwidth(1.0, s2, obs.q).h;
    const auto k = known_error_estimator(obs, observation_error_cf(ErrorLaw::Normal, s.sigma), h, xs);
    const auto kde = naive_kde(obs.w, normal_reference_bandwidth(obs.w), xs);
    expect_proper_density(k);
    expect_proper_density(kde);
    known.push_back(ise(k, spec));
    naive.push_back(ise(kde, spec));
  }
  EXPECT_LT(quartile_summary(known).median, quartile_summary(naive).median);
}

TEST(NaiveKde, NormalReferenceBandwidth)
{
  const std::vector<double> w{1.0, 2.0, 4.0, 7.0};
  const double sd = std::sqrt(sample_variance(w));
  EXPECT_DOUBLE_EQ(normal_reference_bandwidth(w), std::pow(4.0 / 3.0, 0.2) * sd * std::pow(4.0, -0.2));
  expect_proper_density(naive_kde(w, 0.8, linspace(-5.0, 12.0, 401)));
}

TEST(BackTransform, SubstitutionAndDomain)
{
  DensityEstimate y;
  y.xs = linspace(-10.0, 10.0, 20001);
  y.fs.resize(y.xs.size());
  for (std::size_t i = 0; i < y.xs.size(); ++i)
    y.fs[i] = std::exp(-0.5 * y.xs[i] * y.xs[i]) / std::sqrt(2.0 * kPi);
  const std::vector<double> at51{51.0};
  EXPECT_NEAR(back_transform_log50(y, at51).fs[0], y.fs[10000], 1e-15);
  const std::vector<double> bad{49.0};
  EXPECT_THROW(back_transform_log50(y, bad), InvalidArgument);
  const std::vector<double> edge{50.0};
  EXPECT_THROW(back_transform_log50(y, edge), InvalidArgument);
}

TEST(BackTransform, ShiftedLognormalClosedForm)
{
  DensityEstimate y;
  y.xs = linspace(-10.0, 10.0, 20001);
  y.fs.resize(y.xs.size());
  for (std::size_t i = 0; i < y.xs.size(); ++i)
    y.fs[i] = std::exp(-0.5 * y.xs[i] * y.xs[i]) / std::sqrt(2.0 * kPi);
  const std::vector<double> xs{50.5, 51.0, 52.0, 55.0, 60.0};
  const auto fx = back_transform_log50(y, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double u = xs[i] - 50.0;
    const double l = std::log(u);
    EXPECT_NEAR(fx.fs[i], std::exp(-0.5 * l * l) / (u * std::sqrt(2.0 * kPi)), 1e-6);
  }
  // mass over (50, inf)
  std::vector<double> grid;
  for (double l = -9.0; l <= 9.0; l += 0.0005)
    grid.push_back(50.0 + std::exp(l));
  const auto dense = back_transform_log50(y, grid);
  EXPECT_NEAR(trapezoid(grid, dense.fs), 1.0, 2e-2);
}
