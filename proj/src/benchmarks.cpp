#include <algorithm>
#include <random>

#include "fracnet/benchmarks.hpp"

namespace fracnet {

Params Network::as_observed() const {
    std::vector<Index> all(static_cast<std::size_t>(nodes()));
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = Index(i);
    return split(all, {});
}

Params Network::split(const std::vector<Index>& observed, const std::vector<Index>& hidden) const {
    return Params::from_network(A, B, Sigma, alphas, observed, hidden);
}

Series Network::simulate(Index samples, std::optional<std::uint64_t> noise_seed) const {
    auto sim = fracnet::simulate(as_observed(), samples, noise_seed);
    return sim.observed;
}

Network three_node_network(double noise_variance) {
    Network net;
    net.A.resize(3, 3);
    net.A << 0.0, 0.1, 0.2,
             -0.01, -0.02, 0.3,
             0.01, -0.03, -0.05;
    net.B = Eigen::MatrixXd::Zero(3, 0);
    net.Sigma = noise_variance * Eigen::MatrixXd::Identity(3, 3);
    net.alphas = Eigen::Vector3d(0.7, 1.1, 0.8);
    return net;
}

Network reveal_benchmark_network(const RevealBenchmarkOptions& o) {
    constexpr Index fixed = 12, pool = 9, d = fixed + pool;
    std::mt19937_64 rng(o.structure_seed);
    std::uniform_real_distribution<double> order(0.6, 1.0);
    std::uniform_real_distribution<double> weak(-o.weak_coupling, o.weak_coupling);
    std::uniform_real_distribution<double> strong(o.coupling_low, o.coupling_high);
    std::uniform_int_distribution<Index> pick_fixed(0, fixed - 1);
    std::bernoulli_distribution sign(0.5);

    Network net;
    net.alphas.resize(d);
    for (Index i = 0; i < d; ++i)
        net.alphas(i) = order(rng);
    net.A = Eigen::MatrixXd::Zero(d, d);
    for (Index i = 0; i < d; ++i)
        net.A(i, i) = -0.05;
    for (Index i = 0; i < fixed; ++i)
        for (Index j = 0; j < fixed; ++j)
            if (i != j)
                net.A(i, j) = weak(rng);
    for (Index i = fixed; i < d; ++i)
        for (Index j = fixed; j < d; ++j)
            if (i != j)
                net.A(i, j) = weak(rng);
    // Every pool node feeds distinct fixed nodes; the draws happen either way so both variants share structure.
    for (Index h = fixed; h < d; ++h) {
        std::vector<Index> targets;
        while (Index(targets.size()) < o.targets_per_pool_node) {
            const Index t = pick_fixed(rng);
            if (std::find(targets.begin(), targets.end(), t) == targets.end())
                targets.push_back(t);
        }
        for (Index t : targets) {
            const double w = strong(rng) * (sign(rng) ? 1.0 : -1.0);
            if (o.coupled)
                net.A(t, h) = w;
        }
    }
    net.B = Eigen::MatrixXd::Zero(d, 0);
    Eigen::VectorXd noise(d);
    noise.head(fixed).setConstant(o.fixed_noise);
    noise.tail(pool).setConstant(o.pool_noise);
    net.Sigma = noise.asDiagonal();
    return net;
}

DataProvider simulated_provider(const Network& net, Index samples) {
    return [net, samples](std::uint64_t seed) { return net.simulate(samples, seed); };
}

} // namespace fracnet
