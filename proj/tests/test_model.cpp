#include <random>

#include <gtest/gtest.h>

#include "fracnet/benchmarks.hpp"
#include "fracnet/model.hpp"
#include "oracles.hpp"

using namespace fracnet;

namespace {

Params random_params(std::mt19937_64& rng, Index n, Index m, Index p, double alpha) {
    Params t = Params::zeros(n, m, p);
    t.A11 = oracle::random_matrix(rng, n, n, 0.3);
    t.A12 = oracle::random_matrix(rng, n, m, 0.3);
    t.A21 = oracle::random_matrix(rng, m, n, 0.3);
    t.A22 = oracle::random_matrix(rng, m, m, 0.3);
    t.B1 = oracle::random_matrix(rng, n, p);
    t.B2 = oracle::random_matrix(rng, m, p);
    t.Sigma1 = 0.01 * oracle::random_spd(rng, n);
    t.Sigma2 = 0.01 * oracle::random_spd(rng, m);
    t.alpha_obs.setConstant(n, alpha);
    t.alpha_lat.setConstant(m, alpha);
    return t;
}

} // namespace

TEST(Simulate, ZeroOrderZeroDynamicsIsZeroAfterStart) {
    Params t = Params::zeros(2, 1, 0);
    Eigen::VectorXd x0(2), z0(1);
    x0 << 1.0, -2.0;
    z0 << 0.5;
    const auto sim = simulate(t, x0, z0, Inputs::zeros(0, 0), 12);
    EXPECT_EQ(sim.observed.values.col(0), x0);
    EXPECT_EQ(sim.observed.values.rightCols(11).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(sim.latent.values.rightCols(11).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Simulate, UnitOrderMatchesLtiBitwise) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        const Params t = random_params(rng, 3, 2, 1, 1.0);
        const Index samples = 40;
        Inputs u{oracle::random_matrix(rng, 1, samples - 2)};
        const Eigen::VectorXd s0 = oracle::random_matrix(rng, 5, 1);
        const auto sim = simulate(t, Eigen::VectorXd(s0.head(3)), Eigen::VectorXd(s0.tail(2)), u, samples);

        Eigen::MatrixXd F = t.stacked_A();
        F.diagonal().array() += 1.0;
        const Eigen::MatrixXd B = t.stacked_B();
        Eigen::MatrixXd s(5, samples);
        s.col(0) = s0;
        for (Index k = 0; k + 1 < samples; ++k) {
            Eigen::VectorXd next = F * s.col(k);
            if (k >= 1)
                next += B * u.values.col(k - 1);
            s.col(k + 1) = next;
        }
        EXPECT_TRUE((sim.observed.values.array() == s.topRows(3).array()).all());
        EXPECT_TRUE((sim.latent.values.array() == s.bottomRows(2).array()).all());
    }
}

TEST(Simulate, SameSeedIsBitwiseIdentical) {
    const Network net = three_node_network();
    const Series a = net.simulate(50, 9), b = net.simulate(50, 9), c = net.simulate(50, 10);
    EXPECT_TRUE((a.values.array() == b.values.array()).all());
    EXPECT_FALSE((a.values.array() == c.values.array()).all());
}

TEST(Simulate, NoiselessIgnoresCovariance) {
    std::mt19937_64 rng(2);
    Params t = random_params(rng, 2, 1, 0, 0.6);
    Eigen::VectorXd x0 = Eigen::VectorXd::Ones(2), z0 = Eigen::VectorXd::Ones(1);
    const auto a = simulate(t, x0, z0, Inputs::zeros(0, 0), 30);
    t.Sigma1 *= 100.0;
    const auto b = simulate(t, x0, z0, Inputs::zeros(0, 0), 30);
    EXPECT_EQ(a.observed.values, b.observed.values);
}

TEST(Simulate, SatisfiesFractionalEquationNoiselessly) {
    std::mt19937_64 rng(8);
    Params t = random_params(rng, 2, 2, 0, 0.0);
    t.alpha_obs << 0.4, 0.9;
    t.alpha_lat << 1.2, 0.7;
    const auto sim = simulate(t, Eigen::VectorXd::Ones(2).eval(), Eigen::VectorXd::Ones(2).eval(),
                              Inputs::zeros(0, 0), 25);
    Eigen::MatrixXd s(4, 25);
    s << sim.observed.values, sim.latent.values;
    const Eigen::MatrixXd d = oracle::frac_diff_bruteforce(s, t.stacked_alphas());
    const Eigen::MatrixXd resid = d.rightCols(24) - t.stacked_A() * s.leftCols(24);
    EXPECT_LT(resid.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Simulate, ThreeNodeSystemKeepsNodeThreeSmall) {
    const Network net = three_node_network();
    double s[3] = {0, 0, 0};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Series x = net.simulate(201, seed);
        for (Index i = 0; i < 3; ++i)
            s[i] += x.values.row(i).cwiseAbs().maxCoeff();
    }
    EXPECT_LT(s[2], s[0]);
    EXPECT_LT(s[2], s[1]);
}

TEST(Simulate, RejectsBadShapes) {
    Params t = Params::zeros(2, 1, 1);
    EXPECT_THROW(simulate(t, Eigen::VectorXd::Zero(3).eval(), Eigen::VectorXd::Zero(1).eval(), Inputs::zeros(1, 0), 5),
                 DimensionError);
    EXPECT_THROW(simulate(t, Eigen::VectorXd::Zero(2).eval(), Eigen::VectorXd::Zero(1).eval(), Inputs::zeros(1, 7), 5),
                 DimensionError);
    t.Sigma1(0, 0) = -1.0;
    EXPECT_THROW(simulate(t, 5), NotPsdError);
}

TEST(Baseline, RecoversCouplingFromNoiselessData) {
    const Network net = three_node_network();
    Params t = net.as_observed();
    Eigen::VectorXd x0(3);
    x0 << 1.0, -0.7, 0.4;
    const auto sim = simulate(t, x0, Eigen::VectorXd(0), Inputs::zeros(0, 0), 80);
    const auto fit = baseline_fit_no_latent(sim.observed.values, t.alpha_obs);
    EXPECT_LT((fit.A - t.A11).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Baseline, RecoversRandomSystem) {
    std::mt19937_64 rng(21);
    Params t = random_params(rng, 4, 0, 0, 0.0);
    t.alpha_obs << 0.3, 0.6, 0.9, 1.2;
    const auto sim = simulate(t, oracle::random_matrix(rng, 4, 1).col(0).eval(), Eigen::VectorXd(0),
                              Inputs::zeros(0, 0), 60);
    const auto fit = baseline_fit_no_latent(sim.observed.values, t.alpha_obs);
    EXPECT_LT((fit.A - t.A11).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Baseline, UnderdeterminedIsSingular) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 3);
    EXPECT_THROW(baseline_fit_no_latent(x, Eigen::VectorXd::Constant(3, 0.5)), SingularSystemError);
}

TEST(Baseline, WithInputsIsDeterministic) {
    const Network net = three_node_network();
    const Series x = net.simulate(120, 3);
    BaselineOptions o;
    o.p = 1;
    o.seed = 5;
    const auto a = baseline_fit_no_latent(x.values, net.alphas, o);
    const auto b = baseline_fit_no_latent(x.values, net.alphas, o);
    EXPECT_EQ(a.A, b.A);
    EXPECT_EQ(a.inputs.values, b.inputs.values);
    EXPECT_EQ(a.inputs.values.rows(), 1);
    EXPECT_EQ(a.inputs.values.cols(), 118);
    EXPECT_NO_THROW(a.to_params(net.alphas).validate());
}

TEST(Network, SplitMatchesBlocks) {
    const Network net = three_node_network();
    const Params t = net.split({0, 1}, {2});
    EXPECT_EQ(t.A12(1, 0), net.A(1, 2));
    EXPECT_EQ(t.A21(0, 1), net.A(2, 1));
    EXPECT_EQ(t.alpha_lat(0), 0.8);
}

TEST(RevealBenchmark, DecoupledSharesStructure) {
    RevealBenchmarkOptions c, d;
    d.coupled = false;
    const Network a = reveal_benchmark_network(c), b = reveal_benchmark_network(d);
    EXPECT_EQ(a.nodes(), 21);
    EXPECT_EQ(a.alphas, b.alphas);
    EXPECT_EQ(a.A.topLeftCorner(12, 12), b.A.topLeftCorner(12, 12));
    EXPECT_EQ(b.A.topRightCorner(12, 9).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(a.A.topRightCorner(12, 9).cwiseAbs().maxCoeff(), 0.1);
}
