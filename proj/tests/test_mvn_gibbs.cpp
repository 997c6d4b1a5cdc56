#include "truncnorm/diagnostics.hpp"
#include "truncnorm/mvn_gibbs.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

namespace truncnorm {
namespace {

Matrix random_spd(Eigen::Index p, RandomStream& rng)
{
    Matrix a(p, p);
    for (Eigen::Index r = 0; r < p; ++r)
        for (Eigen::Index c = 0; c < p; ++c)
            a(r, c) = draw_standard_normal(rng);
    Matrix s = a * a.transpose() + static_cast<double>(p) * Matrix::Identity(p, p);
    return 0.5 * (s + s.transpose());
}

Matrix bivariate(double rho)
{
    Matrix s(2, 2);
    s << 1.0, rho, rho, 1.0;
    return s;
}

std::vector<double> coordinate(const std::vector<Vector>& draws, Eigen::Index j)
{
    std::vector<double> out;
    out.reserve(draws.size());
    for (const auto& d : draws)
        out.push_back(d(j));
    return out;
}

TEST(InvertSpd, Examples)
{
    EXPECT_LE((invert_spd(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);

    Matrix expected(2, 2);
    expected << 1.0, -0.5, -0.5, 1.0;
    expected /= 0.75;
    EXPECT_LE((invert_spd(bivariate(0.5)) - expected).cwiseAbs().maxCoeff(), 1e-14);

    Matrix hilbert(3, 3);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            hilbert(r, c) = 1.0 / (r + c + 1);
    EXPECT_LE((hilbert * invert_spd(hilbert) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(InvertSpd, RejectsIndefiniteAndIllConditioned)
{
    EXPECT_THROW(invert_spd(bivariate(1.5)), NotPositiveDefinite);
    Matrix near_singular(2, 2);
    near_singular << 1.0, 1.0 - 1e-14, 1.0 - 1e-14, 1.0;
    EXPECT_THROW(invert_spd(near_singular), NotPositiveDefinite);
    EXPECT_THROW(invert_spd(Matrix(2, 3)), DomainError);
}

TEST(SubmatrixInverse, Examples)
{
    const Matrix v = invert_spd(bivariate(0.3));
    const Matrix s0 = submatrix_inverse(v, 0);
    ASSERT_EQ(s0.rows(), 1);
    EXPECT_NEAR(s0(0, 0), 1.0, 1e-14);

    Matrix diag = Eigen::Vector3d(1.0, 4.0, 9.0).asDiagonal();
    const Matrix d1 = submatrix_inverse(invert_spd(diag), 1);
    EXPECT_NEAR(d1(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(d1(1, 1), 1.0 / 9.0, 1e-15);
    EXPECT_EQ(d1(0, 1), 0.0);

    Matrix bad = Matrix::Identity(2, 2);
    bad(0, 0) = -1.0;
    EXPECT_THROW(submatrix_inverse(bad, 0), DomainError);
    EXPECT_THROW(submatrix_inverse(v, 2), DomainError);
}

TEST(SubmatrixInverse, MatchesDirectInverse)
{
    RandomStream rng(5);
    const Matrix sigma = random_spd(5, rng);
    const Matrix v = invert_spd(sigma);
    for (Eigen::Index i = 0; i < 5; ++i) {
        const Matrix direct = detail::drop_index(sigma, i).inverse();
        EXPECT_LE((submatrix_inverse(v, i) - direct).cwiseAbs().maxCoeff(), 1e-10) << i;
    }
}

TEST(SubmatrixInverse, IdentityOverRandomSuite)
{
    RandomStream rng(2026);
    for (Eigen::Index p = 2; p <= 10; ++p) {
        for (int rep = 0; rep < 50; ++rep) {
            const Matrix sigma = random_spd(p, rng);
            const MvnSpec spec(Vector::Zero(p), sigma);
            const auto moments = conditional_moments(spec);
            for (Eigen::Index i = 0; i < p; ++i) {
                const Matrix prod = submatrix_inverse(moments.precision, i) * detail::drop_index(sigma, i);
                ASSERT_LE((prod - Matrix::Identity(p - 1, p - 1)).cwiseAbs().maxCoeff(), 1e-10);
                ASSERT_NEAR(moments.variances[static_cast<std::size_t>(i)] * moments.precision(i, i), 1.0, 1e-10);
            }
        }
    }
}

TEST(ConditionalMoments, Bivariate)
{
    for (double rho : {0.0, 0.5, -0.9}) {
        const auto m = conditional_moments(MvnSpec(Vector::Zero(2), bivariate(rho)));
        for (int i = 0; i < 2; ++i) {
            EXPECT_NEAR(m.coefficients[i](0), rho, 1e-14);
            EXPECT_NEAR(m.variances[i], 1.0 - rho * rho, 1e-14);
        }
    }
}

TEST(ConditionalMoments, DiagonalAndCentering)
{
    Matrix diag = Eigen::Vector3d(1.0, 4.0, 9.0).asDiagonal();
    const auto d = conditional_moments(MvnSpec(Vector::Zero(3), diag));
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(d.coefficients[i].cwiseAbs().maxCoeff(), 0.0);
        EXPECT_NEAR(d.variances[i], diag(i, i), 1e-14);
    }

    RandomStream rng(8);
    const Vector mu = Eigen::Vector4d(1.0, -2.0, 0.5, 3.0);
    const MvnSpec spec(mu, random_spd(4, rng));
    const auto m = conditional_moments(spec);
    for (Eigen::Index i = 0; i < 4; ++i)
        EXPECT_NEAR(m.conditional_mean(mu, mu, i), mu(i), 1e-14);
}

TEST(ConditionalMoments, OneDimensional)
{
    Matrix s(1, 1);
    s << 4.0;
    const auto m = conditional_moments(MvnSpec(Vector::Constant(1, 2.0), s));
    EXPECT_EQ(m.variances[0], 4.0);
    EXPECT_EQ(m.coefficients[0].size(), 0);
}

TEST(ConditionalMoments, IllConditionedStaysAccurate)
{
    const double rho = 0.9999999;
    const auto m = conditional_moments(MvnSpec(Vector::Zero(2), bivariate(rho)));
    for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(m.coefficients[static_cast<std::size_t>(i)](0) / rho, 1.0, 1e-8);
        EXPECT_NEAR(m.variances[static_cast<std::size_t>(i)] / ((1.0 - rho) * (1.0 + rho)), 1.0, 1e-7);
    }
}

TEST(MvnSpec, Validation)
{
    EXPECT_THROW(MvnSpec(Vector::Zero(2), bivariate(2.0)), NotPositiveDefinite);
    Matrix asym = bivariate(0.5);
    asym(0, 1) = 0.4;
    EXPECT_THROW(MvnSpec(Vector::Zero(2), asym), DomainError);
    EXPECT_THROW(MvnSpec(Vector::Zero(3), bivariate(0.5)), DomainError);
}

TEST(SliceBounds, Ball)
{
    const ConvexRegion ball = Ball(Vector::Zero(2), 1.0);
    auto s = slice_bounds_rest(ball, 0, Vector::Constant(1, 0.0));
    ASSERT_TRUE(s);
    EXPECT_EQ(s->lower, -1.0);
    EXPECT_EQ(s->upper, 1.0);

    s = slice_bounds_rest(ball, 0, Vector::Constant(1, 1.0));
    ASSERT_TRUE(s);
    EXPECT_EQ(s->lower, 0.0);
    EXPECT_EQ(s->upper, 0.0);

    EXPECT_FALSE(slice_bounds_rest(ball, 0, Vector::Constant(1, 1.5)));

    const ConvexRegion off = Ball(Eigen::Vector2d(1.0, -1.0), 2.0);
    s = slice_bounds(off, 1, Eigen::Vector2d(1.0, 123.0));
    ASSERT_TRUE(s);
    EXPECT_DOUBLE_EQ(s->lower, -3.0);
    EXPECT_DOUBLE_EQ(s->upper, 1.0);
}

TEST(SliceBounds, BallIsSymmetricInTheOtherCoordinates)
{
    const Vector center = Eigen::Vector4d(0.5, -1.0, 2.0, 0.0);
    const Vector permuted_center = Eigen::Vector4d(0.5, 0.0, -1.0, 2.0);
    const ConvexRegion b1 = Ball(center, 3.0);
    const ConvexRegion b2 = Ball(permuted_center, 3.0);
    const auto s1 = slice_bounds(b1, 0, Eigen::Vector4d(0.0, -0.5, 1.0, 0.7));
    const auto s2 = slice_bounds(b2, 0, Eigen::Vector4d(0.0, 0.7, -0.5, 1.0));
    ASSERT_TRUE(s1 && s2);
    EXPECT_DOUBLE_EQ(s1->lower, s2->lower);
    EXPECT_DOUBLE_EQ(s1->upper, s2->upper);
}

TEST(SliceBounds, BoxAndOrderCone)
{
    const ConvexRegion box = Box(Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, kInf));
    auto s = slice_bounds(box, 1, Eigen::Vector2d(0.3, 0.2));
    ASSERT_TRUE(s);
    EXPECT_EQ(s->lower, 0.0);
    EXPECT_EQ(s->upper, kInf);

    const ConvexRegion cone = OrderCone{};
    s = slice_bounds_rest(cone, 1, Eigen::Vector2d(0.0, 2.0));
    ASSERT_TRUE(s);
    EXPECT_EQ(s->lower, 0.0);
    EXPECT_EQ(s->upper, 2.0);
    s = slice_bounds(cone, 0, Eigen::Vector3d(9.0, 1.0, 2.0));
    EXPECT_EQ(s->lower, -kInf);
    EXPECT_EQ(s->upper, 1.0);

    const ConvexRegion capped = OrderCone{0.0, 1.0};
    s = slice_bounds(capped, 2, Eigen::Vector3d(0.1, 0.4, 0.0));
    EXPECT_EQ(s->lower, 0.4);
    EXPECT_EQ(s->upper, 1.0);
    EXPECT_FALSE(slice_bounds(capped, 1, Eigen::Vector3d(0.8, 0.0, 0.2)));

    EXPECT_THROW(Box(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)), DomainError);
    EXPECT_THROW(Ball(Vector::Zero(2), 0.0), DomainError);
}

TEST(Contains, Predicates)
{
    const ConvexRegion ball = Ball(Vector::Zero(2), 2.0);
    EXPECT_TRUE(contains(ball, Eigen::Vector2d(0.0, 2.0)));
    EXPECT_FALSE(contains(ball, Eigen::Vector2d(1.5, 1.5)));
    EXPECT_TRUE(contains(OrderCone{}, Eigen::Vector3d(-1, 0, 0)));
    EXPECT_FALSE(contains(OrderCone{}, Eigen::Vector3d(0, -1, 0)));
    EXPECT_FALSE(contains(OrderCone{0.0, 1.0}, Eigen::Vector3d(0, 0.5, 1.5)));
    EXPECT_TRUE(contains(Box(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)), Eigen::Vector2d(1, -1)));
}

TEST(GibbsSweep, TangentCoordinateIsLeftUnchanged)
{
    const MvnSpec spec(Vector::Zero(2), bivariate(0.5));
    const auto moments = conditional_moments(spec);
    const ConvexRegion ball = Ball(Vector::Zero(2), 2.0);
    RandomStream rng(3);
    Vector state = Eigen::Vector2d(0.0, 2.0);
    gibbs_sweep(state, spec.mean(), moments, ball, rng);
    EXPECT_EQ(state(0), 0.0);
    EXPECT_LE(std::abs(state(1)), 2.0);
}

TEST(GibbsSweep, EmptySliceIsInconsistentState)
{
    const MvnSpec spec(Vector::Zero(2), bivariate(0.0));
    const auto moments = conditional_moments(spec);
    RandomStream rng(3);
    Vector state = Eigen::Vector2d(3.0, 3.0);
    EXPECT_THROW(gibbs_sweep(state, spec.mean(), moments, Ball(Vector::Zero(2), 1.0), rng), InconsistentState);
}

TEST(GibbsSweep, DiagonalBoxFactorizes)
{
    // independent coordinates: each marginal is a univariate truncated normal
    Matrix diag = Eigen::Vector3d(1.0, 0.25, 4.0).asDiagonal();
    const Vector mu = Eigen::Vector3d(0.0, 1.0, -1.0);
    const Vector lo = Eigen::Vector3d(1.0, -kInf, -2.0);
    const Vector hi = Eigen::Vector3d(1.5, 0.5, 3.0);
    const MvnSpec spec(mu, diag);
    const ConvexRegion box = Box(lo, hi);
    const auto out = run_chain(spec, box, {Eigen::Vector3d(1.2, 0.0, 0.0), 200000, 100, 5, 99});
    for (Eigen::Index j = 0; j < 3; ++j) {
        auto xs = coordinate(out.draws, j);
        std::sort(xs.begin(), xs.end());
        const UnivariateTruncationSpec uni(mu(j), std::sqrt(diag(j, j)), lo(j), hi(j));
        EXPECT_GT(ks_test(xs, [&](double x) { return truncated_cdf(uni, x).value(); }).p_value, 0.001) << j;
    }
}

TEST(RunChain, BallSupportAndDeterminism)
{
    const MvnSpec spec(Vector::Zero(2), bivariate(0.5));
    const ConvexRegion ball = Ball(Vector::Zero(2), 2.0);
    const ChainConfig config{Vector::Zero(2), 100000, 1000, 1, 42};
    const auto a = run_chain(spec, ball, config);
    const auto b = run_chain(spec, ball, config);
    ASSERT_EQ(a.draws.size(), 100000u);
    EXPECT_EQ(a.total_sweeps, 101000u);
    EXPECT_GE(a.univariate_trials, 2u * a.total_sweeps);
    for (std::size_t k = 0; k < a.draws.size(); ++k) {
        ASSERT_LE(a.draws[k].norm(), 2.0 + 1e-12);
        ASSERT_TRUE(contains(ball, a.draws[k]));
        ASSERT_EQ(a.draws[k], b.draws[k]);
    }
}

TEST(RunChain, IndependentBoxMarginals)
{
    const MvnSpec spec(Vector::Zero(2), bivariate(0.0));
    const ConvexRegion box = Box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    const auto out = run_chain(spec, box, {Vector::Zero(2), 100000, 100, 5, 7});
    const UnivariateTruncationSpec uni(0, 1, -1, 1);
    for (Eigen::Index j = 0; j < 2; ++j) {
        auto xs = coordinate(out.draws, j);
        std::sort(xs.begin(), xs.end());
        EXPECT_GT(ks_test(xs, [&](double x) { return truncated_cdf(uni, x).value(); }).p_value, 0.001);
    }
}

TEST(RunChain, OrderConeKeepsOrdering)
{
    RandomStream rng(4);
    const MvnSpec spec(Eigen::Vector4d(0.3, 0.1, 0.6, 0.2), random_spd(4, rng) * 0.1);
    const ConvexRegion cone = OrderCone{0.0, 1.0};
    const auto out = run_chain(spec, cone, {Eigen::Vector4d(0.1, 0.2, 0.3, 0.4), 20000, 100, 1, 5});
    for (const auto& d : out.draws) {
        ASSERT_TRUE(contains(cone, d));
        ASSERT_GE(d(0), 0.0);
        ASSERT_LE(d(3), 1.0);
    }
}

TEST(RunChain, Preconditions)
{
    const MvnSpec spec(Vector::Zero(2), bivariate(0.0));
    const ConvexRegion ball = Ball(Vector::Zero(2), 1.0);
    EXPECT_THROW(run_chain(spec, ball, {Eigen::Vector2d(2.0, 0.0), 10, 0, 1, 1}), DomainError);
    EXPECT_THROW(run_chain(spec, ball, {Vector::Zero(3), 10, 0, 1, 1}), DomainError);
    EXPECT_THROW(run_chain(spec, ball, {Vector::Zero(2), 0, 0, 1, 1}), DomainError);
    EXPECT_THROW(run_chain(spec, ball, {Vector::Zero(2), 10, 0, 0, 1}), DomainError);
}

TEST(MvnRejection, BallAcceptance)
{
    const MvnSpec spec(Vector::Zero(2), bivariate(0.0));
    const ConvexRegion ball = Ball(Vector::Zero(2), 3.0);
    RandomStream rng(10);
    std::uint64_t trials = 0, accepts = 0;
    while (trials < 100000) {
        const auto d = mvn_rejection(spec, ball, rng, 1000);
        ASSERT_TRUE(contains(ball, d.value));
        trials += d.trials;
        ++accepts;
    }
    // P(chi2_2 <= 9) = 1 - exp(-4.5)
    EXPECT_NEAR(double(accepts) / double(trials), 0.98889100346175769, 0.003);
}

TEST(MvnRejection, SmallBoxAcceptance)
{
    const MvnSpec spec(Vector::Zero(2), bivariate(0.0));
    const ConvexRegion box = Box(Vector::Constant(2, -0.1), Vector::Constant(2, 0.1));
    RandomStream rng(11);
    std::uint64_t trials = 0, accepts = 0;
    while (trials < 1000000) {
        const auto d = mvn_rejection(spec, box, rng, 100000);
        ASSERT_TRUE(contains(box, d.value));
        trials += d.trials;
        ++accepts;
    }
    // (Phi(0.1) - Phi(-0.1))^2
    EXPECT_NEAR(double(accepts) / double(trials), 0.006345026488661998, 0.0005);
}

TEST(MvnRejection, CapExceeded)
{
    const MvnSpec spec(Vector::Zero(2), bivariate(0.0));
    const ConvexRegion far = Ball(Eigen::Vector2d(10.0, 10.0), 0.5);
    RandomStream rng(1);
    try {
        mvn_rejection(spec, far, rng, 500);
        FAIL();
    } catch (const SamplingFailure& e) {
        EXPECT_EQ(e.trials(), 500u);
    }
}

TEST(ErgodicAverage, ConstantAndEmpty)
{
    const std::vector<Vector> draws(10, Vector::Zero(2));
    EXPECT_EQ(ergodic_average(draws, [](const Vector&) { return 1.0; }), 1.0);
    EXPECT_THROW(ergodic_average(std::vector<Vector>{}, [](const Vector&) { return 1.0; }), DomainError);
    EXPECT_THROW(RunningAverage{}.value(), DomainError);
}

TEST(ErgodicAverage, SymmetricBallTarget)
{
    const MvnSpec spec(Vector::Zero(2), bivariate(0.0));
    const ConvexRegion ball = Ball(Vector::Zero(2), 2.0);
    const auto out = run_chain(spec, ball, {Vector::Zero(2), 1000000, 1000, 1, 2024});
    EXPECT_NEAR(ergodic_average(out.draws, [](const Vector& t) { return t(0); }), 0.0, 0.01);
    EXPECT_NEAR(ergodic_average(out.draws, [](const Vector& t) { return t(1); }), 0.0, 0.01);
    EXPECT_NEAR(ergodic_average(out.draws, [](const Vector& t) { return t(0) > 0.0 ? 1.0 : 0.0; }), 0.5, 0.005);

    const auto running = running_averages(std::span(out.draws).first(1000), [](const Vector& t) { return t(0); });
    ASSERT_EQ(running.size(), 1000u);
    EXPECT_EQ(running.front(), out.draws.front()(0));
}

} // namespace
} // namespace truncnorm
