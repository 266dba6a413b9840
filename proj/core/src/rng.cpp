#include "medfpca/rng.hpp"

#include <cmath>
#include <numbers>

#include "medfpca/errors.hpp"
#include "medfpca/mathutil.hpp"

namespace medfpca {

namespace {

// SplitMix64 finalizer; used to decorrelate seeds of derived streams.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

RngStream RngStream::substream(std::uint64_t tag) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(tag + 0x51ED270B7A4BD217ULL)));
}

RngStream RngStream::substream(std::string_view name) const {
  return substream(fnv1a64(name));
}

double RngStream::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double RngStream::normal() {
  // Trig-form Box-Muller consuming exactly two variates per draw, so the
  // stream position is a pure function of the number of calls.
  const double u1 = uniform_pos();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw NumericalError("gamma sampler: shape and rate must be positive");
  if (shape < 1.0) {
    // Boost by one and scale down: X = Gamma(shape+1) * U^{1/shape}.
    const double g = gamma(shape + 1.0, 1.0);
    const double u = uniform_pos();
    return g * std::pow(u, 1.0 / shape) / rate;
  }
  // Marsaglia-Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
      return d * v / rate;
  }
}

int RngStream::poisson(double mean) {
  if (!(mean >= 0.0) || mean > 700.0)
    throw NumericalError("poisson sampler: mean out of range");
  const double target = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  while (target > cdf && k < 100000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw NumericalError("uniform_index: n must be positive");
  // Rejection to avoid modulo bias.
  const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

double RngStream::truncated_gamma(double shape, double rate, double lo,
                                  double hi) {
  if (!(shape > 0.0) || !(lo >= 0.0) || !(hi > lo))
    throw NumericalError("truncated_gamma: invalid support or shape");
  if (rate > 0.0) {
    // Inverse CDF through the regularized incomplete gamma, bisected on
    // [lo, hi]; P is monotone so 60 bisection steps give ~1e-18 relative.
    const double plo = reg_lower_gamma(shape, rate * lo);
    const double phi = reg_lower_gamma(shape, rate * hi);
    if (phi <= plo) return lo;  // support mass numerically degenerate
    const double target = plo + uniform() * (phi - plo);
    double a = lo, b = hi;
    for (int it = 0; it < 64; ++it) {
      const double mid = 0.5 * (a + b);
      if (reg_lower_gamma(shape, rate * mid) < target)
        a = mid;
      else
        b = mid;
    }
    return 0.5 * (a + b);
  }
  if (rate == 0.0) {
    // Density x^{shape-1} on [lo,hi]: closed-form inverse CDF.
    const double u = uniform();
    const double plo = std::pow(lo, shape), phi = std::pow(hi, shape);
    return std::pow(plo + u * (phi - plo), 1.0 / shape);
  }
  // rate < 0: density x^{shape-1} e^{|rate| x}, increasing for shape >= 1.
  // Propose from the tilted exponential on [lo,hi] restricted to e^{|rate|x}
  // (inverse CDF below is numerically stable near hi), accept with
  // (x/hi)^{shape-1} <= 1.
  if (shape < 1.0)
    throw NumericalError("truncated_gamma: negative rate requires shape >= 1");
  const double b = -rate;  // > 0
  for (int it = 0; it < 10000; ++it) {
    const double u = uniform();
    // x = hi + log(u + (1-u) e^{-b (hi-lo)}) / b  in [lo, hi]
    const double x = hi + std::log(u + (1.0 - u) * std::exp(-b * (hi - lo))) / b;
    const double logacc = (shape - 1.0) * (std::log(x) - std::log(hi));
    if (std::log(uniform_pos()) < logacc) return x;
  }
  return hi;  // overwhelming mass at the upper end
}

double RngStream::lower_truncated_gamma(double shape, double rate, double lo) {
  if (!(shape > 0.0) || !(rate > 0.0) || !(lo >= 0.0))
    throw NumericalError("lower_truncated_gamma: invalid arguments");
  if (lo == 0.0) return gamma(shape, rate);
  // Conditional on acceptance the first draw >= lo is exactly the truncated
  // law, so capping attempts and mixing in the inverse-CDF branch (itself
  // exact on [lo, hi]) keeps the output distribution exact.
  for (int it = 0; it < 64; ++it) {
    const double x = gamma(shape, rate);
    if (x >= lo) return x;
  }
  const double hi =
      std::max(4.0 * lo, (shape + 12.0 * std::sqrt(shape) + 30.0) / rate);
  return truncated_gamma(shape, rate, lo, hi);
}

Eigen::VectorXd RngStream::normal_vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

}  // namespace medfpca
