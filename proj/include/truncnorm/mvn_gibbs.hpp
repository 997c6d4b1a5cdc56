#pragma once

// Gibbs sampling for a multivariate normal restricted to a convex region.
//
// Each coordinate is redrawn from its conditional (untruncated) normal
// truncated to the slice of the region through the current state. The
// conditional regression coefficients for all p coordinates come from a
// single inversion of the covariance: the inverse of the covariance with
// row/column i removed is recovered from V = Sigma^-1 by a rank-one update.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "truncnorm/errors.hpp"
#include "truncnorm/numerics.hpp"
#include "truncnorm/univariate.hpp"

namespace truncnorm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Mean and covariance of N_p(mu, Sigma).
class MvnSpec
{
  public:
    MvnSpec(Vector mean, Matrix covariance) : mean_(std::move(mean)), cov_(std::move(covariance))
    {
        const auto p = mean_.size();
        if (p < 1)
            throw DomainError("mvn spec: dimension must be at least 1");
        if (cov_.rows() != p || cov_.cols() != p)
            throw DomainError("mvn spec: covariance must be " + std::to_string(p) + "x" + std::to_string(p));
        if (!mean_.allFinite() || !cov_.allFinite())
            throw DomainError("mvn spec: non-finite entries");
        const double scale = cov_.cwiseAbs().maxCoeff();
        if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw DomainError("mvn spec: covariance is not symmetric");
        Eigen::LLT<Matrix> llt(cov_);
        if (llt.info() != Eigen::Success)
            throw NotPositiveDefinite("mvn spec: covariance is not positive definite");
        chol_ = llt.matrixL();
    }

    Eigen::Index dim() const noexcept { return mean_.size(); }
    const Vector& mean() const noexcept { return mean_; }
    const Matrix& covariance() const noexcept { return cov_; }
    /// Lower Cholesky factor L with L L^T = Sigma.
    const Matrix& cholesky() const noexcept { return chol_; }

  private:
    Vector mean_;
    Matrix cov_;
    Matrix chol_;
};

/// Reciprocal-condition based estimate of the 1-norm condition number.
inline double condition_estimate(const Matrix& spd)
{
    Eigen::LLT<Matrix> llt(spd);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("condition_estimate: Cholesky factorization failed");
    return 1.0 / llt.rcond();
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
/// Throws NotPositiveDefinite on failure or when the condition number
/// estimate exceeds 1e12.
inline Matrix invert_spd(const Matrix& covariance)
{
    if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
        throw DomainError("invert_spd: matrix must be square and non-empty");
    Eigen::LLT<Matrix> llt(covariance);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("invert_spd: Cholesky factorization failed");
    if (llt.rcond() < 1e-12)
        throw NotPositiveDefinite("invert_spd: condition number above 1e12");
    Matrix inv = llt.solve(Matrix::Identity(covariance.rows(), covariance.cols()));
    return 0.5 * (inv + inv.transpose());
}

namespace detail {

// Copies m without row/column `skip` (square) or without entry `skip` (vector).
inline Matrix drop_index(const Matrix& m, Eigen::Index skip)
{
    const Eigen::Index n = m.rows();
    Matrix out(n - 1, n - 1);
    for (Eigen::Index r = 0, ro = 0; r < n; ++r) {
        if (r == skip)
            continue;
        for (Eigen::Index c = 0, co = 0; c < n; ++c) {
            if (c == skip)
                continue;
            out(ro, co++) = m(r, c);
        }
        ++ro;
    }
    return out;
}

inline Vector drop_index(const Vector& v, Eigen::Index skip)
{
    Vector out(v.size() - 1);
    for (Eigen::Index j = 0, o = 0; j < v.size(); ++j)
        if (j != skip)
            out(o++) = v(j);
    return out;
}

} // namespace detail

/// Inverse of Sigma with row/column i removed, from V = Sigma^-1:
/// V_{-i,-i} - V_{i,-i} V_{i,-i}^T / V_ii. Index i is zero-based.
inline Matrix submatrix_inverse(const Matrix& precision, Eigen::Index i)
{
    const Eigen::Index p = precision.rows();
    if (precision.cols() != p || i < 0 || i >= p)
        throw DomainError("submatrix_inverse: index out of range");
    const double vii = precision(i, i);
    if (!(vii > 0.0))
        throw DomainError("submatrix_inverse: invalid precision, V_ii must be positive");
    const Vector row = detail::drop_index(Vector(precision.row(i).transpose()), i);
    return detail::drop_index(precision, i) - row * row.transpose() / vii;
}

/// Precomputed conditional regression of each coordinate on the others.
struct ConditionalMoments
{
    /// coefficients[i] has length p-1: Sigma_{i,-i}^T Sigma_{-i,-i}^-1.
    std::vector<Vector> coefficients;
    /// Conditional variance of coordinate i given the rest.
    std::vector<double> variances;
    Matrix precision;

    Eigen::Index dim() const noexcept { return precision.rows(); }

    /// E[theta_i | theta_{-i}] for a full state; entry i of `state` is ignored.
    double conditional_mean(const Vector& mean, const Vector& state, Eigen::Index i) const
    {
        double m = mean(i);
        const Vector& c = coefficients[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0, k = 0; j < state.size(); ++j) {
            if (j == i)
                continue;
            m += c(k++) * (state(j) - mean(j));
        }
        return m;
    }
};

inline ConditionalMoments conditional_moments(const MvnSpec& spec)
{
    const Matrix& sigma = spec.covariance();
    const Eigen::Index p = spec.dim();
    ConditionalMoments out;
    out.precision = invert_spd(sigma);
    out.coefficients.reserve(static_cast<std::size_t>(p));
    out.variances.reserve(static_cast<std::size_t>(p));

    for (Eigen::Index i = 0; i < p; ++i) {
        if (p == 1) {
            out.coefficients.emplace_back(0);
            out.variances.push_back(sigma(0, 0));
            continue;
        }
        const Matrix sub_inv = submatrix_inverse(out.precision, i);
        const Vector cross = detail::drop_index(Vector(sigma.col(i)), i);
        Vector coeff = sub_inv * cross; // sub_inv is symmetric
        double var = sigma(i, i) - cross.dot(coeff);
        // cond_var_i * V_ii == 1 is an identity. On ill-conditioned input the
        // submatrix route cancels badly; fall back to the precision row.
        const double vii = out.precision(i, i);
        if (!(var > 0.0) || std::abs(var * vii - 1.0) > 1e-6) {
            var = 1.0 / vii;
            coeff = -detail::drop_index(Vector(out.precision.col(i)), i) / vii;
        }
        out.coefficients.push_back(std::move(coeff));
        out.variances.push_back(var);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Regions

struct Interval
{
    double lower;
    double upper;

    double width() const noexcept { return upper - lower; }
};

/// Euclidean ball B(center, radius).
struct Ball
{
    Vector center;
    double radius;

    Ball(Vector c, double r) : center(std::move(c)), radius(r)
    {
        if (!(radius > 0.0) || !std::isfinite(radius))
            throw DomainError("ball: radius must be positive");
    }
};

/// Axis-aligned box; bounds may be infinite.
struct Box
{
    Vector lower;
    Vector upper;

    Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi))
    {
        if (lower.size() != upper.size())
            throw DomainError("box: bound vectors differ in length");
        for (Eigen::Index j = 0; j < lower.size(); ++j)
            if (!(lower(j) < upper(j)))
                throw DomainError("box: lower must be below upper in every coordinate");
    }
};

/// theta_1 <= theta_2 <= ... <= theta_p, optionally within [floor, ceiling].
struct OrderCone
{
    double floor = -kInf;
    double ceiling = kInf;
};

using ConvexRegion = std::variant<Ball, Box, OrderCone>;

inline constexpr double kBoundaryTolerance = 1e-12;

/// Slice of the region through `state` along coordinate i, or empty when
/// the line misses the region. Entry i of `state` is ignored.
inline std::optional<Interval> slice_bounds(const ConvexRegion& region, Eigen::Index i, const Vector& state)
{
    return std::visit(
        [&](const auto& r) -> std::optional<Interval> {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, Ball>) {
                double s = 0.0;
                for (Eigen::Index j = 0; j < state.size(); ++j)
                    if (j != i)
                        s += (state(j) - r.center(j)) * (state(j) - r.center(j));
                const double r2 = r.radius * r.radius;
                if (s > r2 * (1.0 + kBoundaryTolerance))
                    return std::nullopt;
                const double half = std::sqrt(std::max(0.0, r2 - s));
                return Interval{r.center(i) - half, r.center(i) + half};
            } else if constexpr (std::is_same_v<R, Box>) {
                return Interval{r.lower(i), r.upper(i)};
            } else {
                const double lo = i > 0 ? std::max(r.floor, state(i - 1)) : r.floor;
                const double hi = i + 1 < state.size() ? std::min(r.ceiling, state(i + 1)) : r.ceiling;
                if (lo > hi)
                    return std::nullopt;
                return Interval{lo, hi};
            }
        },
        region);
}

/// Slice for the p-1 "other" coordinates given separately (theta_rest
/// excludes coordinate i).
inline std::optional<Interval> slice_bounds_rest(const ConvexRegion& region, Eigen::Index i, const Vector& theta_rest)
{
    Vector state(theta_rest.size() + 1);
    for (Eigen::Index j = 0, k = 0; j < state.size(); ++j)
        state(j) = j == i ? 0.0 : theta_rest(k++);
    return slice_bounds(region, i, state);
}

/// Membership predicate with kBoundaryTolerance slack on the boundary.
inline bool contains(const ConvexRegion& region, const Vector& theta)
{
    return std::visit(
        [&](const auto& r) -> bool {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, Ball>) {
                if (theta.size() != r.center.size())
                    return false;
                return (theta - r.center).norm() <= r.radius + kBoundaryTolerance;
            } else if constexpr (std::is_same_v<R, Box>) {
                if (theta.size() != r.lower.size())
                    return false;
                for (Eigen::Index j = 0; j < theta.size(); ++j)
                    if (theta(j) < r.lower(j) - kBoundaryTolerance || theta(j) > r.upper(j) + kBoundaryTolerance)
                        return false;
                return true;
            } else {
                for (Eigen::Index j = 0; j < theta.size(); ++j) {
                    if (theta(j) < r.floor - kBoundaryTolerance || theta(j) > r.ceiling + kBoundaryTolerance)
                        return false;
                    if (j > 0 && theta(j) < theta(j - 1))
                        return false;
                }
                return true;
            }
        },
        region);
}

// ---------------------------------------------------------------------------
// Sampling

/// One systematic-scan sweep (coordinates 0..p-1 in order). Returns the
/// total number of univariate proposals used.
inline std::uint64_t gibbs_sweep(Vector& state, const Vector& mean, const ConditionalMoments& moments,
                                 const ConvexRegion& region, RandomStream& rng, const SamplerOptions& opts = {})
{
    std::uint64_t trials = 0;
    for (Eigen::Index i = 0; i < state.size(); ++i) {
        const auto slice = slice_bounds(region, i, state);
        if (!slice)
            throw InconsistentState("gibbs_sweep: empty slice for coordinate " + std::to_string(i) +
                                    "; state is outside the region");
        if (slice->width() < kMinInterval) {
            // tangent point: the slice is a single point; keep the coordinate
            continue;
        }
        const double m = moments.conditional_mean(mean, state, i);
        const double sd = std::sqrt(moments.variances[static_cast<std::size_t>(i)]);
        const auto spec = std::isfinite(slice->lower) || std::isfinite(slice->upper)
                              ? UnivariateTruncationSpec(m, sd, slice->lower, slice->upper)
                              : UnivariateTruncationSpec::untruncated(m, sd);
        const DrawResult r = draw_truncated(spec, SamplerMethod::Auto, rng, opts);
        state(i) = r.value;
        trials += r.trials;
    }
    return trials;
}

struct ChainConfig
{
    Vector initial;
    std::uint64_t n_keep = 1;
    std::uint64_t burn_in = 1000;
    std::uint64_t thin = 1;
    std::uint64_t seed = 0;
    SamplerOptions sampler{};
};

struct ChainOutput
{
    std::vector<Vector> draws;
    std::uint64_t total_sweeps = 0;
    std::uint64_t univariate_trials = 0;
};

/// Runs burn_in discarded sweeps, then keeps every thin-th sweep until
/// n_keep draws are stored.
inline ChainOutput run_chain(const MvnSpec& spec, const ConvexRegion& region, const ChainConfig& config)
{
    if (config.n_keep < 1 || config.thin < 1)
        throw DomainError("run_chain: n_keep and thin must be at least 1");
    if (config.initial.size() != spec.dim())
        throw DomainError("run_chain: initial point has the wrong dimension");
    if (!contains(region, config.initial))
        throw DomainError("run_chain: initial point lies outside the region");

    const ConditionalMoments moments = conditional_moments(spec);
    RandomStream rng(config.seed);
    ChainOutput out;
    out.draws.reserve(config.n_keep);
    Vector state = config.initial;

    for (std::uint64_t s = 0; s < config.burn_in; ++s) {
        out.univariate_trials += gibbs_sweep(state, spec.mean(), moments, region, rng, config.sampler);
        ++out.total_sweeps;
    }
    while (out.draws.size() < config.n_keep) {
        for (std::uint64_t t = 0; t < config.thin; ++t) {
            out.univariate_trials += gibbs_sweep(state, spec.mean(), moments, region, rng, config.sampler);
            ++out.total_sweeps;
        }
        out.draws.push_back(state);
    }
    return out;
}

struct MvnDraw
{
    Vector value;
    std::uint64_t trials;
};

/// Exact draw by sampling N_p(mu, Sigma) until the point lands in the region.
inline MvnDraw mvn_rejection(const MvnSpec& spec, const ConvexRegion& region, RandomStream& rng, std::uint64_t cap)
{
    if (cap < 1)
        throw DomainError("mvn_rejection: cap must be at least 1");
    const Eigen::Index p = spec.dim();
    Vector z(p);
    for (std::uint64_t t = 1; t <= cap; ++t) {
        for (Eigen::Index j = 0; j < p; ++j)
            z(j) = draw_standard_normal(rng);
        Vector x = spec.mean() + spec.cholesky() * z;
        if (contains(region, x))
            return {std::move(x), t};
    }
    throw SamplingFailure("mvn_rejection: acceptance too low", cap);
}

// ---------------------------------------------------------------------------
// Ergodic averages

inline double ergodic_average(std::span<const Vector> draws, const std::function<double(const Vector&)>& f)
{
    if (draws.empty())
        throw DomainError("ergodic_average: no draws");
    double sum = 0.0;
    for (const Vector& d : draws)
        sum += f(d);
    return sum / static_cast<double>(draws.size());
}

/// Running (1/n) sum f(theta_k), updated one draw at a time.
class RunningAverage
{
  public:
    void add(double value)
    {
        sum_ += value;
        ++count_;
    }

    std::uint64_t count() const noexcept { return count_; }
    double sum() const noexcept { return sum_; }

    double value() const
    {
        if (count_ == 0)
            throw DomainError("RunningAverage: no values");
        return sum_ / static_cast<double>(count_);
    }

  private:
    double sum_ = 0.0;
    std::uint64_t count_ = 0;
};

/// Trajectory of running averages of f along the chain; entry k is the
/// average over the first k+1 draws.
inline std::vector<double> running_averages(std::span<const Vector> draws,
                                            const std::function<double(const Vector&)>& f)
{
    std::vector<double> out;
    out.reserve(draws.size());
    RunningAverage avg;
    for (const Vector& d : draws) {
        avg.add(f(d));
        out.push_back(avg.value());
    }
    return out;
}

} // namespace truncnorm
