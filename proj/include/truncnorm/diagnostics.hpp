#pragma once

// Closed-form truncated normal oracles and the goodness-of-fit checks used
// to validate the samplers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "truncnorm/errors.hpp"
#include "truncnorm/numerics.hpp"
#include "truncnorm/univariate.hpp"

namespace truncnorm {

struct AcceptanceStats
{
    std::uint64_t proposals = 0;
    std::uint64_t accepts = 0;

    void record(const DrawResult& r)
    {
        proposals += r.trials;
        ++accepts;
    }

    Probability rate() const
    {
        if (proposals == 0)
            return Probability(0.0);
        return Probability(static_cast<double>(accepts) / static_cast<double>(proposals));
    }

    /// Binomial standard error of rate().
    double standard_error() const
    {
        if (proposals == 0)
            return 0.0;
        const double p = rate();
        return std::sqrt(p * (1.0 - p) / static_cast<double>(proposals));
    }
};

namespace detail {

inline double truncated_mass(double a, double b)
{
    const double z = normal_interval_mass(a, b);
    if (!(z >= 1e-300))
        throw DomainError("truncated normal: normalizing mass underflows (extreme truncation)");
    return z;
}

inline double x_pdf(double x)
{
    return std::isfinite(x) ? x * normal_pdf(x) : 0.0;
}

} // namespace detail

/// CDF of the truncated normal; 0 below lower, 1 above upper.
inline Probability truncated_cdf(const UnivariateTruncationSpec& spec, double x)
{
    if (std::isnan(x))
        throw DomainError("truncated_cdf: NaN argument");
    const auto [a, b] = standardize(spec);
    const double mass = detail::truncated_mass(a, b);
    const double z = std::clamp((x - spec.mu()) / spec.sigma(), a, b);
    if (z <= a)
        return Probability(0.0);
    if (z >= b)
        return Probability(1.0);
    return Probability(std::min(1.0, normal_interval_mass(a, z) / mass));
}

/// Inverse of truncated_cdf by bisection; for checking, not for sampling.
inline double truncated_quantile(const UnivariateTruncationSpec& spec, double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("truncated_quantile: p must lie in (0,1)");
    // Finite bracket: for an unbounded side, step out until the CDF brackets p.
    double lo = spec.lower();
    double hi = spec.upper();
    for (double step = spec.sigma(); !std::isfinite(lo); step *= 2.0) {
        const double c = spec.has_upper() ? spec.upper() : spec.mu();
        if (truncated_cdf(spec, c - step) < p)
            lo = c - step;
    }
    for (double step = spec.sigma(); !std::isfinite(hi); step *= 2.0) {
        const double c = std::max(lo, spec.mu());
        if (truncated_cdf(spec, c + step) > p)
            hi = c + step;
    }
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        (truncated_cdf(spec, mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct TruncatedMoments
{
    double mean;
    double variance;
};

/// Mean and variance of the truncated normal.
///
/// Works with the standardized density ratios phi(a)/Z and a phi(a)/Z,
/// where Z is taken from the tail on the side the interval lies on so the
/// far-tail cases keep their relative accuracy.
inline TruncatedMoments truncated_moments(const UnivariateTruncationSpec& spec)
{
    const auto [a, b] = standardize(spec);
    const double mass = detail::truncated_mass(a, b);
    const double pa = normal_pdf(a);
    const double pb = normal_pdf(b);
    const double m = (pa - pb) / mass;
    const double v = 1.0 + (detail::x_pdf(a) - detail::x_pdf(b)) / mass - m * m;
    return {spec.mu() + spec.sigma() * m, spec.sigma() * spec.sigma() * std::max(v, 0.0)};
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

struct KsReport
{
    double statistic;
    std::size_t n;
    double p_value;
};

/// Asymptotic Kolmogorov survival function P(K > lambda), 100-term series.
inline double kolmogorov_survival(double lambda)
{
    if (lambda <= 0.1)
        return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1) ? term : -term;
        if (term < 1e-300)
            break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS test of sorted samples against a continuous CDF.
inline KsReport ks_test(std::span<const double> sorted, const std::function<double(double)>& cdf)
{
    const std::size_t n = sorted.size();
    if (n < 10)
        throw DomainError("ks_test: need at least 10 samples");
    if (!std::is_sorted(sorted.begin(), sorted.end()))
        throw DomainError("ks_test: samples must be sorted");
    const double dn = static_cast<double>(n);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / dn - f, f - static_cast<double>(i) / dn});
    }
    return {d, n, kolmogorov_survival(std::sqrt(dn) * d)};
}

/// Two-sample KS test; inputs need not be sorted.
inline KsReport ks_two_sample(std::vector<double> x, std::vector<double> y)
{
    if (x.size() < 10 || y.size() < 10)
        throw DomainError("ks_two_sample: need at least 10 samples per side");
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double t = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= t)
            ++i;
        while (j < y.size() && y[j] <= t)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    const double ne = nx * ny / (nx + ny);
    return {d, x.size() + y.size(), kolmogorov_survival(std::sqrt(ne) * d)};
}

// ---------------------------------------------------------------------------
// Multi-chain spread

struct MultiChainSpread
{
    std::vector<double> means;
    std::vector<double> variances;
    double between;
    double within;
    /// between / within; +inf when chains are constant but disagree.
    double ratio;
};

/// Variance of the chain means over the mean within-chain variance.
/// Values near 0 indicate the chains agree.
inline MultiChainSpread multi_chain_spread(std::span<const std::vector<double>> chains)
{
    if (chains.size() < 2)
        throw DomainError("multi_chain_spread: need at least 2 chains");
    const std::size_t len = chains.front().size();
    if (len < 100)
        throw DomainError("multi_chain_spread: chains need at least 100 values");
    MultiChainSpread out{};
    for (const auto& c : chains) {
        if (c.size() != len)
            throw DomainError("multi_chain_spread: chains differ in length");
        double mean = 0.0;
        for (double v : c)
            mean += v;
        mean /= static_cast<double>(len);
        double ss = 0.0;
        for (double v : c)
            ss += (v - mean) * (v - mean);
        out.means.push_back(mean);
        out.variances.push_back(ss / static_cast<double>(len - 1));
    }
    const double k = static_cast<double>(chains.size());
    double grand = 0.0;
    for (double m : out.means)
        grand += m;
    grand /= k;
    double between = 0.0;
    for (double m : out.means)
        between += (m - grand) * (m - grand);
    out.between = between / (k - 1.0);
    double within = 0.0;
    for (double v : out.variances)
        within += v;
    out.within = within / k;

    if (out.within > 0.0)
        out.ratio = out.between / out.within;
    else
        out.ratio = out.between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return out;
}

} // namespace truncnorm
