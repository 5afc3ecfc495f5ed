#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace phasedecon {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

//! Derives an independent stream key from (seed, stream), so that replicate
//! k of a study draws the same numbers regardless of scheduling.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream)
{
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

class Rng
{
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
    : engine_(stream_key(seed, stream))
  {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(engine_); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential() { return std::exponential_distribution<double>(1.0)(engine_); }

  //! Zero-mean Laplace draw with the given standard deviation (scale sd/sqrt 2).
  double laplace(double sd)
  {
    const double b = sd / std::sqrt(2.0);
    double u = uniform() - 0.5;
    while (u == -0.5)
      u = uniform() - 0.5;
    return -b * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
  }

  //! Chi-square with integer degrees of freedom, as a sum of squared normals.
  double chi_square(int dof)
  {
    double s = 0.0;
    for (int k = 0; k < dof; ++k) {
      const double z = normal();
      s += z * z;
    }
    return s;
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace phasedecon
