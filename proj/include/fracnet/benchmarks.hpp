#ifndef FRACNET_BENCHMARKS_HPP
#define FRACNET_BENCHMARKS_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fracnet/eval.hpp"
#include "fracnet/model.hpp"

namespace fracnet {

/// A fully specified network before any channel is hidden.
struct Network {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd Sigma;
    Eigen::VectorXd alphas;

    Index nodes() const { return A.rows(); }
    Params as_observed() const;
    Params split(const std::vector<Index>& observed, const std::vector<Index>& hidden) const;
    Series simulate(Index samples, std::optional<std::uint64_t> noise_seed) const;
};

/// Three-node pedagogical system with orders {0.7, 1.1, 0.8} and isotropic noise.
Network three_node_network(double noise_variance = 1e-2);

struct RevealBenchmarkOptions {
    bool coupled = true;             // pool nodes drive fixed nodes; otherwise the two groups do not interact
    std::uint64_t structure_seed = 7;
    double fixed_noise = 1e-2;       // innovation variance of the fixed nodes
    double pool_noise = 1e-1;        // innovation variance of the pool nodes
    double coupling_low = 0.15;      // |pool -> fixed| weights drawn from [low, high]
    double coupling_high = 0.3;
    int targets_per_pool_node = 4;
    double weak_coupling = 0.03;     // within-group weights drawn from [-weak, weak]
};

/// 21-node stand-in for the EEG reveal sweep: nodes 0..11 are the fixed observed set, 12..20 the hidden pool.
Network reveal_benchmark_network(const RevealBenchmarkOptions& options = {});

/// Provider drawing a fresh noisy trajectory of `samples` columns per seed.
DataProvider simulated_provider(const Network& net, Index samples);

} // namespace fracnet

#endif // FRACNET_BENCHMARKS_HPP
