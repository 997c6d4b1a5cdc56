#pragma once

// One- and two-sided truncated normal samplers.
//
// All samplers work on the standardized scale (mu = 0, sigma = 1);
// draw_truncated() handles the location-scale map. The accept-reject
// samplers report how many proposals they consumed so acceptance rates
// can be checked empirically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "truncnorm/errors.hpp"
#include "truncnorm/numerics.hpp"

namespace truncnorm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standardized intervals narrower than this are rejected by the samplers.
inline constexpr double kMinInterval = 1e-12;

enum class SamplerMethod
{
    RepeatedNormal,
    Inversion,
    ExponentialAR,
    UniformAR,
    OneSidedThenReject,
    Auto
};

constexpr std::string_view to_string(SamplerMethod m)
{
    switch (m) {
    case SamplerMethod::RepeatedNormal: return "repeated-normal";
    case SamplerMethod::Inversion: return "inversion";
    case SamplerMethod::ExponentialAR: return "exponential-ar";
    case SamplerMethod::UniformAR: return "uniform-ar";
    case SamplerMethod::OneSidedThenReject: return "one-sided-then-reject";
    case SamplerMethod::Auto: return "auto";
    }
    return "unknown";
}

struct SamplerOptions
{
    std::uint64_t max_proposals = 1'000'000;
};

/// Location, scale and (possibly infinite) truncation bounds.
class UnivariateTruncationSpec
{
  public:
    UnivariateTruncationSpec(double mu, double sigma, double lower, double upper)
        : mu_(mu), sigma_(sigma), lower_(lower), upper_(upper)
    {
        validate(false);
    }

    /// The plain N(mu, sigma^2); the only way to get two infinite bounds.
    static UnivariateTruncationSpec untruncated(double mu, double sigma)
    {
        return UnivariateTruncationSpec(mu, sigma, -kInf, kInf, true);
    }

    double mu() const noexcept { return mu_; }
    double sigma() const noexcept { return sigma_; }
    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    bool has_lower() const noexcept { return std::isfinite(lower_); }
    bool has_upper() const noexcept { return std::isfinite(upper_); }

  private:
    UnivariateTruncationSpec(double mu, double sigma, double lower, double upper, bool allow_untruncated)
        : mu_(mu), sigma_(sigma), lower_(lower), upper_(upper)
    {
        validate(allow_untruncated);
    }

    void validate(bool allow_untruncated) const
    {
        if (!std::isfinite(mu_))
            throw DomainError("truncation spec: mu must be finite");
        if (!(sigma_ > 0.0) || !std::isfinite(sigma_))
            throw DomainError("truncation spec: sigma must be positive and finite");
        if (std::isnan(lower_) || std::isnan(upper_))
            throw DomainError("truncation spec: NaN bound");
        if (lower_ == kInf || upper_ == -kInf)
            throw DomainError("truncation spec: bound infinite on the wrong side");
        if (!(lower_ < upper_))
            throw DomainError("truncation spec: lower must be strictly below upper");
        if (!allow_untruncated && !std::isfinite(lower_) && !std::isfinite(upper_))
            throw DomainError("truncation spec: both bounds infinite; use untruncated()");
    }

    double mu_;
    double sigma_;
    double lower_;
    double upper_;
};

struct StandardizedBounds
{
    double a;
    double b;
};

inline StandardizedBounds standardize(const UnivariateTruncationSpec& spec)
{
    return {(spec.lower() - spec.mu()) / spec.sigma(), (spec.upper() - spec.mu()) / spec.sigma()};
}

struct DrawResult
{
    double value;
    std::uint64_t trials;
};

/// Acceptance-maximizing rate of the translated exponential proposal.
/// Satisfies alpha - 1/alpha == a.
inline double alpha_star(double a)
{
    if (!std::isfinite(a))
        throw DomainError("alpha_star: truncation point must be finite");
    // Stable for large negative a as well: (a + sqrt(a^2+4))/2 == 2/(sqrt(a^2+4) - a).
    const double root = std::hypot(a, 2.0);
    return a >= 0.0 ? 0.5 * (a + root) : 2.0 / (root - a);
}

/// Translated exponential proposal Exp(alpha, shift) for N+(0, shift, 1),
/// together with its envelope constant M (h <= M g on [shift, inf)).
/// The acceptance probability of one run is 1/M.
struct ExponentialProposal
{
    double alpha;
    double shift;
    double bound_constant;

    static ExponentialProposal make(double shift, double alpha)
    {
        if (!(alpha > 0.0))
            throw DomainError("exponential proposal: alpha must be positive");
        if (!std::isfinite(shift))
            throw DomainError("exponential proposal: shift must be finite");
        const double scale = 1.0 / (alpha * kSqrt2Pi * normal_cdf(-shift));
        const double m = alpha >= shift ? scale * std::exp(0.5 * alpha * alpha - alpha * shift)
                                        : scale * std::exp(-0.5 * shift * shift);
        return {alpha, shift, m};
    }

    static ExponentialProposal optimal(double shift) { return make(shift, alpha_star(shift)); }

    /// h(z) / (M g(z)) for z >= shift.
    double ratio(double z) const
    {
        if (alpha >= shift)
            return std::exp(-0.5 * (z - alpha) * (z - alpha));
        return std::exp(-0.5 * z * z + alpha * (z - shift) + 0.5 * shift * shift);
    }
};

namespace detail {

inline Probability clamp_probability(double v)
{
    return Probability(std::clamp(v, 0.0, 1.0));
}

[[noreturn]] inline void throw_cap(std::string_view method, std::uint64_t trials)
{
    throw SamplingFailure(std::string("proposal cap exceeded in ") + std::string(method), trials);
}

inline DrawResult repeated_normal(double a, double b, RandomStream& rng, const SamplerOptions& opts)
{
    for (std::uint64_t t = 1; t <= opts.max_proposals; ++t) {
        const double z = draw_standard_normal(rng);
        if (z >= a && z <= b)
            return {z, t};
    }
    throw_cap(to_string(SamplerMethod::RepeatedNormal), opts.max_proposals);
}

// Accepts z <= b among draws of the optimal exponential AR from a;
// b = +inf gives the plain one-sided sampler.
inline DrawResult exponential_ar(double a, double b, RandomStream& rng, const SamplerOptions& opts)
{
    const double alpha = alpha_star(a);
    for (std::uint64_t t = 1; t <= opts.max_proposals; ++t) {
        const double z = draw_shifted_exponential(alpha, a, rng);
        if (z > b)
            continue;
        const double u = rng.next_uniform();
        if (u <= std::exp(-0.5 * (z - alpha) * (z - alpha)))
            return {z, t};
    }
    throw_cap(b == kInf ? to_string(SamplerMethod::ExponentialAR) : to_string(SamplerMethod::OneSidedThenReject),
              opts.max_proposals);
}

inline DrawResult uniform_ar(double a, double b, RandomStream& rng, const SamplerOptions& opts)
{
    // log of the envelope height over [a, b]
    const double d = a > 0.0 ? 0.5 * a * a : (b < 0.0 ? 0.5 * b * b : 0.0);
    const double width = b - a;
    for (std::uint64_t t = 1; t <= opts.max_proposals; ++t) {
        const double z = std::min(a + width * rng.next_uniform(), b);
        const double u = rng.next_uniform();
        if (u <= std::exp(d - 0.5 * z * z))
            return {z, t};
    }
    throw_cap(to_string(SamplerMethod::UniformAR), opts.max_proposals);
}

} // namespace detail

/// Inversion map for N+(0, a, 1). Uses the upper-tail form for a > 0 so
/// that far-tail truncation points keep full precision.
inline double one_sided_inversion(double a, double u)
{
    if (a > 0.0)
        return std::max(a, -normal_quantile((1.0 - u) * normal_cdf(-a)));
    const double pa = normal_cdf(a);
    return std::max(a, normal_quantile(pa + u * (1.0 - pa)));
}

/// Inversion map for the standard normal truncated to [a, b].
inline double two_sided_inversion(double a, double b, double u)
{
    double z;
    if (a > 0.0) {
        const double qa = normal_cdf(-a);
        const double qb = normal_cdf(-b);
        z = -normal_quantile(qa - u * (qa - qb));
    } else {
        const double pa = normal_cdf(a);
        const double pb = normal_cdf(b);
        z = normal_quantile(pa + u * (pb - pa));
    }
    return std::clamp(z, a, b);
}

/// Probability that one run of the exponential AR with rate alpha accepts.
/// The alpha <= a branch is the Rayleigh-tail (Marsaglia) rate.
inline Probability acceptance_one_sided(double a, double alpha)
{
    if (!(alpha > 0.0))
        throw DomainError("acceptance_one_sided: alpha must be positive");
    if (!std::isfinite(a))
        throw DomainError("acceptance_one_sided: truncation point must be finite");
    const double tail = normal_cdf(-a);
    const double expo = a < alpha ? alpha * a - 0.5 * alpha * alpha : 0.5 * a * a;
    return detail::clamp_probability(alpha * std::exp(expo) * tail * kSqrt2Pi);
}

/// Smallest upper bound b above which the one-sided sampler followed by
/// rejection of z > b beats uniform AR on [a, b]. Defined for a >= 0.
inline double eq21_bound(double a)
{
    if (!(a >= 0.0) || !std::isfinite(a))
        throw DomainError("eq21_bound: truncation point must be finite and nonnegative");
    const double root = std::sqrt(a * a + 4.0);
    return a + 2.0 * std::sqrt(std::numbers::e) / (a + root) * std::exp((a * a - a * root) / 4.0);
}

struct TwoSidedChoice
{
    SamplerMethod method;
    /// Sample on (-b, -a) and negate.
    bool reflected;
};

/// Best-acceptance method for standardized bounds a < b (either may be infinite).
///
/// Intervals straddling zero use repeated normal sampling once the width
/// reaches sqrt(2 pi), uniform AR below it. Intervals on the positive side
/// (a >= 0, including a == 0) pick between the one-sided exponential sampler
/// with rejection above b and uniform AR via eq21_bound(). Intervals with
/// b <= 0 are reflected onto the positive side.
inline TwoSidedChoice choose_two_sided_method(double a, double b)
{
    if (!(a < b))
        throw DomainError("choose_two_sided_method: requires a < b");
    bool reflected = false;
    if (a < 0.0 && b <= 0.0) {
        reflected = true;
        const double lo = -b;
        b = -a;
        a = lo;
    }
    if (a < 0.0) {
        return {b - a >= kSqrt2Pi ? SamplerMethod::RepeatedNormal : SamplerMethod::UniformAR, reflected};
    }
    return {b > eq21_bound(a) ? SamplerMethod::OneSidedThenReject : SamplerMethod::UniformAR, reflected};
}

inline DrawResult draw_one_sided(double a, SamplerMethod method, RandomStream& rng, const SamplerOptions& opts = {})
{
    if (!std::isfinite(a))
        throw DomainError("draw_one_sided: truncation point must be finite");
    if (method == SamplerMethod::Auto)
        method = a < 0.0 ? SamplerMethod::RepeatedNormal : SamplerMethod::ExponentialAR;

    switch (method) {
    case SamplerMethod::RepeatedNormal: return detail::repeated_normal(a, kInf, rng, opts);
    case SamplerMethod::Inversion: return {one_sided_inversion(a, rng.next_uniform()), 1};
    case SamplerMethod::ExponentialAR:
    case SamplerMethod::OneSidedThenReject: return detail::exponential_ar(a, kInf, rng, opts);
    default:
        throw DomainError("draw_one_sided: method " + std::string(to_string(method)) +
                          " needs a bounded interval");
    }
}

/// N-(0, b, 1) by reflection of the left-truncated sampler.
inline DrawResult draw_right_truncated(double b, SamplerMethod method, RandomStream& rng,
                                       const SamplerOptions& opts = {})
{
    const DrawResult r = draw_one_sided(-b, method, rng, opts);
    return {-r.value, r.trials};
}

inline DrawResult draw_two_sided(double a, double b, SamplerMethod method, RandomStream& rng,
                                 const SamplerOptions& opts = {})
{
    if (!std::isfinite(a) || !std::isfinite(b))
        throw DomainError("draw_two_sided: bounds must be finite");
    if (!(a < b))
        throw DomainError("draw_two_sided: requires a < b");
    if (b - a < kMinInterval)
        throw DomainError("draw_two_sided: degenerate interval of width " + std::to_string(b - a));

    if (method == SamplerMethod::Auto) {
        const TwoSidedChoice choice = choose_two_sided_method(a, b);
        if (choice.reflected) {
            const DrawResult r = draw_two_sided(-b, -a, choice.method, rng, opts);
            return {-r.value, r.trials};
        }
        method = choice.method;
    }

    switch (method) {
    case SamplerMethod::RepeatedNormal: return detail::repeated_normal(a, b, rng, opts);
    case SamplerMethod::Inversion: return {two_sided_inversion(a, b, rng.next_uniform()), 1};
    case SamplerMethod::UniformAR: return detail::uniform_ar(a, b, rng, opts);
    case SamplerMethod::ExponentialAR:
    case SamplerMethod::OneSidedThenReject: return detail::exponential_ar(a, b, rng, opts);
    case SamplerMethod::Auto: break;
    }
    throw DomainError("draw_two_sided: unresolved method");
}

/// Per-proposal acceptance probability of a method on [a, b].
inline Probability acceptance_two_sided(double a, double b, SamplerMethod method)
{
    if (!std::isfinite(a) || !std::isfinite(b) || !(a < b))
        throw DomainError("acceptance_two_sided: requires finite a < b");
    if (method == SamplerMethod::Auto) {
        const TwoSidedChoice choice = choose_two_sided_method(a, b);
        return choice.reflected ? acceptance_two_sided(-b, -a, choice.method)
                                : acceptance_two_sided(a, b, choice.method);
    }

    const double mass = normal_interval_mass(a, b);
    switch (method) {
    case SamplerMethod::RepeatedNormal: return detail::clamp_probability(mass);
    case SamplerMethod::Inversion: return Probability(1.0);
    case SamplerMethod::UniformAR: {
        const double d = a > 0.0 ? 0.5 * a * a : (b < 0.0 ? 0.5 * b * b : 0.0);
        return detail::clamp_probability(kSqrt2Pi * std::exp(d) / (b - a) * mass);
    }
    case SamplerMethod::ExponentialAR:
    case SamplerMethod::OneSidedThenReject: {
        const double alpha = alpha_star(a);
        return detail::clamp_probability(alpha * std::exp(alpha * a - 0.5 * alpha * alpha) * kSqrt2Pi * mass);
    }
    case SamplerMethod::Auto: break;
    }
    throw DomainError("acceptance_two_sided: unresolved method");
}

/// Full pipeline: standardize, sample, map back with mu + sigma z.
///
/// On a two-sided spec ExponentialAR means OneSidedThenReject, and on a
/// one-sided spec OneSidedThenReject means ExponentialAR.
inline DrawResult draw_truncated(const UnivariateTruncationSpec& spec, SamplerMethod method, RandomStream& rng,
                                 const SamplerOptions& opts = {})
{
    const auto [a, b] = standardize(spec);
    DrawResult z{0.0, 1};
    if (spec.has_lower() && spec.has_upper())
        z = draw_two_sided(a, b, method, rng, opts);
    else if (spec.has_lower())
        z = draw_one_sided(a, method, rng, opts);
    else if (spec.has_upper())
        z = draw_right_truncated(b, method, rng, opts);
    else if (method == SamplerMethod::Inversion)
        z.value = normal_quantile(rng.next_uniform());
    else
        z.value = draw_standard_normal(rng);

    const double x = spec.mu() + spec.sigma() * z.value;
    return {std::clamp(x, spec.lower(), spec.upper()), z.trials};
}

/// Analytic per-proposal acceptance of the method draw_truncated() would run.
/// Empty when the method cannot sample the spec.
inline std::optional<double> analytic_acceptance(const UnivariateTruncationSpec& spec, SamplerMethod method)
{
    auto [a, b] = standardize(spec);
    if (spec.has_lower() && spec.has_upper())
        return acceptance_two_sided(a, b, method).value();
    if (!spec.has_lower() && !spec.has_upper())
        return 1.0;
    if (!spec.has_lower())
        a = -b;
    if (method == SamplerMethod::Auto)
        method = a < 0.0 ? SamplerMethod::RepeatedNormal : SamplerMethod::ExponentialAR;
    switch (method) {
    case SamplerMethod::RepeatedNormal: return normal_cdf(-a).value();
    case SamplerMethod::Inversion: return 1.0;
    case SamplerMethod::ExponentialAR:
    case SamplerMethod::OneSidedThenReject: return acceptance_one_sided(a, alpha_star(a)).value();
    default: return std::nullopt;
    }
}

} // namespace truncnorm
