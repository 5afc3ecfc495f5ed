#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include <phasedecon/model.hpp>

using namespace phasedecon;

namespace {

const Distribution kAll[] = {Distribution::ScaledChiSq3, Distribution::Mixture1, Distribution::Mixture2};

double chi3_cdf(double y)
{
  if (y <= 0.0)
    return 0.0;
  return std::erf(std::sqrt(y / 2.0)) - std::sqrt(2.0 * y / kPi) * std::exp(-y / 2.0);
}

} // namespace

TEST(Sampling, SameSeedReproducesBitIdenticalValues)
{
  const TrueDensitySpec spec(Distribution::ScaledChiSq3);
  const ErrorSpec err{ErrorLaw::Normal, VarianceCase::Case1, 1};
  const auto a = sample_dataset(spec, err, 4, 7);
  const auto b = sample_dataset(spec, err, 4, 7);
  ASSERT_EQ(a.data.rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    ASSERT_EQ(a.data.rows[i].size(), 1u);
    EXPECT_EQ(a.data.rows[i][0], b.data.rows[i][0]);
    EXPECT_EQ(a.latentX[i], b.latentX[i]);
  }
  const auto c = sample_dataset(spec, err, 4, 7, 1);
  EXPECT_NE(a.data.rows[0][0], c.data.rows[0][0]);
}

TEST(Sampling, BimodalLatentMeanMatchesAnalyticMean)
{
  const TrueDensitySpec spec(Distribution::Mixture2);
  const double analytic = (0.5 * 5.0 + 0.5 * 2.5) / std::sqrt(2.2425);
  EXPECT_NEAR(spec.mean(), analytic, 1e-15);
  const auto s = sample_dataset(spec, {ErrorLaw::Laplace, VarianceCase::Case2, 2}, 100, 1);
  EXPECT_EQ(s.data.rows[0].size(), 2u);
  EXPECT_NEAR(mean(s.latentX), analytic, 4.0 * 1.0 / std::sqrt(100.0));

  Rng rng(99);
  double acc = 0.0;
  constexpr int kDraws = 1000000;
  for (int i = 0; i < kDraws; ++i)
    acc += spec.sample(rng);
  EXPECT_NEAR(acc / kDraws, analytic, 5e-3);
}

TEST(Sampling, ZeroNoiseReplicatesEqualLatentValue)
{
  const TrueDensitySpec spec(Distribution::Mixture1);
  const auto s = sample_dataset(spec, {ErrorLaw::Normal, VarianceCase::Zero, 3}, 10, 5);
  for (std::size_t i = 0; i < 10; ++i)
    for (double w : s.data.rows[i])
      EXPECT_EQ(w, s.latentX[i]);
}

TEST(Sampling, RejectsTooSmallOrOddSamples)
{
  const TrueDensitySpec spec(Distribution::ScaledChiSq3);
  EXPECT_THROW(sample_dataset(spec, {ErrorLaw::Normal, VarianceCase::Case2, 1}, 1, 1), InvalidArgument);
  EXPECT_THROW(sample_dataset(spec, {ErrorLaw::Normal, VarianceCase::Case1, 1}, 5, 1), InvalidArgument);
  EXPECT_NO_THROW(sample_dataset(spec, {ErrorLaw::Normal, VarianceCase::Case2, 1}, 5, 1));
}

TEST(Sampling, ReplicateDifferencesRecoverObservationVariance)
{
  const TrueDensitySpec spec(Distribution::ScaledChiSq3);
  for (auto law : {ErrorLaw::Normal, ErrorLaw::Laplace}) {
    const ErrorSpec err{law, VarianceCase::Case1, 10000};
    const auto s = sample_dataset(spec, err, 2, 11);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& row = s.data.rows[i];
      double acc = 0.0;
      std::size_t pairs = 0;
      for (std::size_t j = 0; j + 1 < row.size(); j += 2, ++pairs)
        acc += 0.5 * (row[j] - row[j + 1]) * (row[j] - row[j + 1]);
      const double tau_sq = err.tau_sq(i, 2);
      EXPECT_NEAR(acc / pairs / tau_sq, 1.0, 0.05);
    }
  }
}

TEST(Sampling, UnitVarianceForEveryTarget)
{
  for (auto d : kAll) {
    const TrueDensitySpec spec(d);
    Rng rng(3, static_cast<std::uint64_t>(d));
    std::vector<double> xs(1000000);
    for (auto& x : xs)
      x = spec.sample(rng);
    EXPECT_NEAR(sample_variance(xs), 1.0, 0.01) << to_string(d);
  }
}

TEST(ErrorStructure, CaseOneSplitsHalves)
{
  const ErrorSpec err{ErrorLaw::Normal, VarianceCase::Case1, 2, 1.0};
  EXPECT_DOUBLE_EQ(err.sigma_sq(0, 10), 0.025);
  EXPECT_DOUBLE_EQ(err.sigma_sq(4, 10), 0.025);
  EXPECT_DOUBLE_EQ(err.sigma_sq(5, 10), 0.975);
  EXPECT_DOUBLE_EQ(err.tau_sq(9, 10), 2.0 * 0.975);
  for (auto c : {VarianceCase::Case1, VarianceCase::Case2, VarianceCase::Case3})
    for (std::size_t i = 0; i < 10; ++i)
      EXPECT_GT((ErrorSpec{ErrorLaw::Normal, c, 1}.sigma_sq(i, 10)), 0.0);
}

TEST(TrueDensity, ChiSquareVanishesAtZero)
{
  EXPECT_EQ(TrueDensitySpec(Distribution::ScaledChiSq3).density(0.0), 0.0);
}

TEST(TrueDensity, BimodalIntegratesToOne)
{
  const auto xs = linspace(-5.0, 10.0, 30001);
  const auto fs = true_density(TrueDensitySpec(Distribution::Mixture2), xs);
  EXPECT_NEAR(trapezoid(xs, fs), 1.0, 1e-6);
  for (double f : fs)
    EXPECT_GE(f, 0.0);
}

TEST(TrueDensity, EveryTargetIntegratesToOneOnItsSupport)
{
  for (auto d : kAll) {
    const TrueDensitySpec spec(d);
    const auto [lo, hi] = spec.effective_support();
    const double mass = simpson([&](double x) { return spec.density(x); }, lo - 2.0, hi, 200000);
    EXPECT_NEAR(mass, 1.0, 1e-6) << to_string(d);
  }
}

TEST(TrueDensity, ChiSquareChangeOfVariables)
{
  const TrueDensitySpec spec(Distribution::ScaledChiSq3);
  const double r6 = std::sqrt(6.0);
  const double y = r6;
  const double chi3 = std::sqrt(y) * std::exp(-y / 2.0) / (std::pow(2.0, 1.5) * std::tgamma(1.5));
  EXPECT_NEAR(spec.density(1.0), r6 * chi3, 1e-14);
  const double step = 1e-5;
  const double numeric = (chi3_cdf(r6 * (1.0 + step)) - chi3_cdf(r6 * (1.0 - step))) / (2.0 * step);
  EXPECT_NEAR(spec.density(1.0), numeric, 1e-6);
}

TEST(TruePhase, EqualsOneAtOriginAndIsHermitian)
{
  const auto ts = linspace(-10.0, 10.0, 201);
  for (auto d : kAll) {
    const auto ph = true_phase(TrueDensitySpec(d), ts);
    EXPECT_NEAR(std::abs(ph.values[100] - cplx(1.0, 0.0)), 0.0, 1e-15);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      EXPECT_NEAR(std::abs(ph.values[k] - std::conj(ph.values[200 - k])), 0.0, 1e-13);
      if (!ph.excluded[k]) {
        EXPECT_NEAR(std::abs(ph.values[k]), 1.0, 1e-12);
      }
    }
  }
}

TEST(TruePhase, ChiSquareMatchesQuadrature)
{
  const TrueDensitySpec spec(Distribution::ScaledChiSq3);
  // x = s^2 removes the square-root behaviour at the origin
  const double t = 1.0;
  const double re = simpson([&](double s) { return std::cos(t * s * s) * spec.density(s * s) * 2.0 * s; }, 0.0, 6.0, 200000);
  const double im = simpson([&](double s) { return std::sin(t * s * s) * spec.density(s * s) * 2.0 * s; }, 0.0, 6.0, 200000);
  const cplx brute(re, im);
  const std::vector<double> ts{t};
  const auto ph = true_phase(spec, ts);
  EXPECT_NEAR(std::abs(ph.values[0] - brute / std::abs(brute)), 0.0, 1e-6);
  EXPECT_NEAR(std::abs(spec.cf(t) - brute), 0.0, 1e-6);
}

TEST(TruePhase, MixtureCharacteristicFunctionIsContinuous)
{
  const TrueDensitySpec spec(Distribution::Mixture1);
  cplx prev = spec.cf(0.0);
  for (double t = 0.001; t < 30.0; t += 0.001) {
    const cplx cur = spec.cf(t);
    EXPECT_LT(std::abs(cur - prev), 0.01) << t;
    prev = cur;
  }
}
