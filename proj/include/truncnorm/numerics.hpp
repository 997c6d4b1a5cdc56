#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

#include "truncnorm/errors.hpp"

namespace truncnorm {

inline constexpr double kSqrt2Pi = 2.5066282746310002; // sqrt(2*pi)

/// A probability in [0, 1].
class Probability
{
  public:
    constexpr Probability() = default;
    explicit Probability(double v) : value_(v)
    {
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("probability outside [0,1]: " + std::to_string(v));
    }

    constexpr double value() const noexcept { return value_; }
    constexpr operator double() const noexcept { return value_; }

  private:
    double value_ = 0.0;
};

/// Seedable uniform stream. Same seed, same sequence, bit for bit.
///
/// Backed by the 64-bit Mersenne Twister whose output sequence is fixed by
/// the C++ standard. A stream is single-owner; use derive_seed() to split
/// work across threads.
class RandomStream
{
  public:
    using result_type = std::uint64_t;

    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on the open interval (0,1): (k + 1/2) / 2^53 for a 53-bit k.
    double next_uniform()
    {
        const std::uint64_t k = engine_() >> 11;
        return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; maps (seed, index) to a well-separated child seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept
{
    std::uint64_t z = seed + (index + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double normal_pdf(double x)
{
    return std::exp(-0.5 * x * x) / kSqrt2Pi;
}

/// Standard normal CDF, Phi(x) = erfc(-x/sqrt(2))/2. Saturates in the tails.
inline Probability normal_cdf(double x)
{
    if (std::isnan(x))
        throw DomainError("normal_cdf: NaN argument");
    return Probability(0.5 * std::erfc(-x / std::numbers::sqrt2));
}

/// Phi(b) - Phi(a) without cancellation when both bounds lie in the same tail.
inline double normal_interval_mass(double a, double b)
{
    if (a >= 0.0)
        return normal_cdf(-a) - normal_cdf(-b);
    return normal_cdf(b) - normal_cdf(a);
}

namespace detail {

// Acklam's rational approximation, relative error ~1.2e-9.
inline double quantile_initial(double p)
{
    static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                             6.680131188771972e+01, -1.328068155288572e+01};
    static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                             3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace detail

/// Inverse of normal_cdf on (0,1).
///
/// A rational starting point is polished with Halley steps against
/// normal_cdf itself, so the pair stays mutually consistent. Steps are taken
/// on the lower tail (x <= 0) where Phi has full relative accuracy; the
/// upper half is handled by symmetry.
inline double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("normal_quantile: p must lie in (0,1), got " + std::to_string(p));
    if (p == 0.5)
        return 0.0;

    const bool upper = p > 0.5;
    const double tail = upper ? 1.0 - p : p; // exact for p > 0.5 (Sterbenz)
    double x = detail::quantile_initial(tail);
    for (int step = 0; step < 2; ++step) {
        const double err = normal_cdf(x) - tail;
        const double u = err / normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return upper ? -x : x;
}

/// Exact standard normal via the Kinderman-Monahan ratio of uniforms.
inline double draw_standard_normal(RandomStream& rng)
{
    constexpr double scale = 1.7155277699214135; // sqrt(8/e)
    for (;;) {
        const double u = rng.next_uniform();
        const double v = rng.next_uniform();
        const double x = scale * (v - 0.5) / u;
        if (x * x <= -4.0 * std::log(u))
            return x;
    }
}

/// Inversion map of Exp(alpha) translated to start at shift, for u in (0,1).
inline double shifted_exponential_from_uniform(double alpha, double shift, double u)
{
    if (!(alpha > 0.0))
        throw DomainError("shifted exponential: alpha must be positive");
    return shift - std::log(u) / alpha;
}

inline double draw_shifted_exponential(double alpha, double shift, RandomStream& rng)
{
    if (!(alpha > 0.0))
        throw DomainError("shifted exponential: alpha must be positive");
    return shifted_exponential_from_uniform(alpha, shift, rng.next_uniform());
}

} // namespace truncnorm
