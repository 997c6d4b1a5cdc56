// Bivariate normal with correlation rho restricted to a disc of radius r.
// Runs the Gibbs sampler, prints ergodic averages and compares them with an
// exact rejection sample.

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <truncnorm/truncnorm.hpp>

using namespace truncnorm;

int main(int argc, char** argv)
{
    const double rho = argc > 1 ? std::atof(argv[1]) : 0.5;
    const double radius = argc > 2 ? std::atof(argv[2]) : 2.0;

    Matrix cov(2, 2);
    cov << 1.0, rho, rho, 1.0;
    const MvnSpec spec(Vector::Zero(2), cov);
    const ConvexRegion disc = Ball(Vector::Zero(2), radius);

    ChainConfig config{Vector::Zero(2), 200000, 1000, 1, 17, {}};
    const ChainOutput chain = run_chain(spec, disc, config);

    auto first = [](const Vector& t) { return t(0); };
    auto radius2 = [](const Vector& t) { return t.squaredNorm(); };
    auto positive = [](const Vector& t) { return t(0) > 0.0 ? 1.0 : 0.0; };

    const auto trace = running_averages(chain.draws, first);
    std::printf("running mean of theta_1:\n");
    for (std::size_t n = 1000; n <= trace.size(); n *= 10)
        std::printf("  n=%-8zu %+.5f\n", n, trace[n - 1]);

    RandomStream rng(18);
    std::vector<Vector> exact;
    std::uint64_t proposals = 0;
    for (int k = 0; k < 50000; ++k) {
        MvnDraw d = mvn_rejection(spec, disc, rng, 1000000);
        proposals += d.trials;
        exact.push_back(std::move(d.value));
    }

    std::printf("\n%-14s %12s %12s\n", "", "gibbs", "rejection");
    std::printf("%-14s %12.5f %12.5f\n", "E[theta_1]", ergodic_average(chain.draws, first),
                ergodic_average(exact, first));
    std::printf("%-14s %12.5f %12.5f\n", "E[|theta|^2]", ergodic_average(chain.draws, radius2),
                ergodic_average(exact, radius2));
    std::printf("%-14s %12.5f %12.5f\n", "P(theta_1>0)", ergodic_average(chain.draws, positive),
                ergodic_average(exact, positive));
    std::printf("\nunivariate proposals per sweep %.3f, rejection acceptance %.4f\n",
                static_cast<double>(chain.univariate_trials) / static_cast<double>(chain.total_sweeps),
                static_cast<double>(exact.size()) / static_cast<double>(proposals));
    return 0;
}
