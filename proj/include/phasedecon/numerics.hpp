#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <mutex>
#include <numbers>
#include <span>
#include <thread>
#include <vector>

#include "errors.hpp"

namespace phasedecon {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

inline std::vector<double> linspace(double a, double b, std::size_t count)
{
  if (count < 2)
    throw InvalidArgument("linspace needs at least two points");
  std::vector<double> out(count);
  const double step = (b - a) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = a + step * static_cast<double>(k);
  out.back() = b;
  return out;
}

//! Trapezoid rule on an arbitrary (increasing) abscissa.
inline double trapezoid(std::span<const double> xs, std::span<const double> ys)
{
  if (xs.size() != ys.size())
    throw InvalidArgument("trapezoid: abscissa and ordinate sizes differ");
  double sum = 0.0;
  for (std::size_t k = 1; k < xs.size(); ++k)
    sum += 0.5 * (xs[k] - xs[k - 1]) * (ys[k] + ys[k - 1]);
  return sum;
}

//! Trapezoid rule for `count` equally spaced samples of f on [a, b].
template <class F>
double trapezoid(F&& f, double a, double b, std::size_t count)
{
  if (count < 2 || !(b > a))
    return 0.0;
  const double dt = (b - a) / static_cast<double>(count - 1);
  double sum = 0.5 * (f(a) + f(b));
  for (std::size_t k = 1; k + 1 < count; ++k)
    sum += f(a + dt * static_cast<double>(k));
  return sum * dt;
}

//! Composite Simpson rule; `intervals` is rounded up to an even number.
template <class F>
double simpson(F&& f, double a, double b, std::size_t intervals)
{
  intervals += intervals % 2;
  const double dx = (b - a) / static_cast<double>(intervals);
  double sum = f(a) + f(b);
  for (std::size_t k = 1; k < intervals; ++k)
    sum += (k % 2 ? 4.0 : 2.0) * f(a + dx * static_cast<double>(k));
  return sum * dx / 3.0;
}

//! Visits exp(i * (t0 + k * dt) * w) for k = 0..count-1 by repeated rotation.
//! The phasor is recomputed exactly every 64 steps to bound rounding drift.
template <class Fn>
void sweep_phasors(double t0, double dt, std::size_t count, double w, Fn&& fn)
{
  constexpr std::size_t kReanchor = 64;
  const cplx rotation = std::polar(1.0, dt * w);
  cplx z;
  for (std::size_t k = 0; k < count; ++k) {
    if (k % kReanchor == 0)
      z = std::polar(1.0, (t0 + dt * static_cast<double>(k)) * w);
    fn(k, z);
    z *= rotation;
  }
}

//! Linear interpolation on an increasing grid; zero outside [xs.front(), xs.back()].
inline double interpolate_linear(std::span<const double> xs,
                                 std::span<const double> ys,
                                 double x)
{
  if (xs.empty() || x < xs.front() || x > xs.back())
    return 0.0;
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.end())
    return ys.back();
  const auto hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double span = xs[hi] - xs[lo];
  const double frac = span > 0.0 ? (x - xs[lo]) / span : 0.0;
  return ys[lo] + frac * (ys[hi] - ys[lo]);
}

inline double mean(std::span<const double> v)
{
  double s = 0.0;
  for (double x : v)
    s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

//! Sample variance with divisor n - 1.
inline double sample_variance(std::span<const double> v)
{
  if (v.size() < 2)
    return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v)
    s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

//! Runs fn(i) for i in [0, count) on up to `workers` threads. Work items
//! must write only to their own slot; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn)
{
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back(body);
  for (auto& t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace phasedecon
