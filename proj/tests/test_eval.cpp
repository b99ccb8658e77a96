#include <random>

#include <gtest/gtest.h>

#include "fracnet/benchmarks.hpp"
#include "fracnet/eval.hpp"
#include "oracles.hpp"

using namespace fracnet;

namespace {

Params small_model() {
    Params t = Params::zeros(2, 1, 1);
    t.A11 << -0.2, 0.1, 0.05, -0.3;
    t.A12 << 0.4, -0.2;
    t.A21 << 0.1, 0.2;
    t.A22 << -0.1;
    t.B1 << 1.0, 0.0;
    t.B2 << 0.5;
    t.Sigma1 = 0.01 * Eigen::MatrixXd::Identity(2, 2);
    t.Sigma2 = 0.01 * Eigen::MatrixXd::Identity(1, 1);
    t.alpha_obs << 0.6, 0.9;
    t.alpha_lat << 0.7;
    return t;
}

} // namespace

TEST(Predict, ChainedStepsAgree) {
    const Params t = small_model();
    std::mt19937_64 rng(1);
    Inputs u{oracle::random_matrix(rng, 1, 38)};
    const auto sim = simulate(t, Eigen::VectorXd::Ones(2).eval(), Eigen::VectorXd::Ones(1).eval(), u, 40, 3);
    const Index tt = 25;
    // Inputs past the origin are zero in every forecast.
    u.values.rightCols(38 - (tt - 1)).setZero();
    const Eigen::MatrixXd X = sim.observed.values.leftCols(tt + 1);
    const Eigen::MatrixXd Z = sim.latent.values.leftCols(tt);
    const auto full = predict_k_steps(t, X, Z, u, 6);
    const auto head = predict_k_steps(t, X, Z, u, 4);
    Eigen::MatrixXd X2(2, tt + 5), Z2(1, tt + 4);
    X2 << X, head.observed;
    Z2 << Z, head.latent;
    const auto tail = predict_k_steps(t, X2, Z2, u, 2);
    EXPECT_LT((full.observed.leftCols(4) - head.observed).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((full.observed.rightCols(2) - tail.observed).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Predict, NoiselessTrueModelIsExact) {
    const Params t = small_model();
    std::mt19937_64 rng(2);
    Inputs u = Inputs::zeros(1, 48);
    u.values.leftCols(20) = oracle::random_matrix(rng, 1, 20);
    const auto sim = simulate(t, Eigen::VectorXd::Ones(2).eval(), Eigen::VectorXd::Ones(1).eval(), u, 50);
    const Eigen::MatrixXd Z = sim.latent.values.leftCols(49);
    const auto rep = rolling_forecast(t, sim.observed.values, Z, u, 5, 40);
    EXPECT_LT(rep.per_node_error.maxCoeff(), 1e-12);
    EXPECT_EQ(rep.predictions.cols(), 10);
}

TEST(Predict, RejectsBadArguments) {
    const Params t = small_model();
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 10);
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Ones(1, 9);
    EXPECT_THROW(predict_k_steps(t, X, Z, Inputs::zeros(1, 0), 0), ConfigError);
    EXPECT_THROW(predict_k_steps(t, X, Eigen::MatrixXd::Ones(1, 5).eval(), Inputs::zeros(1, 0), 2), DimensionError);
    EXPECT_THROW(predict_k_steps(t, X, Z, Inputs::zeros(2, 0), 2), DimensionError);
    EXPECT_THROW(rolling_forecast(t, X, Z, Inputs::zeros(1, 0), 5, 3), ConfigError);
    EXPECT_THROW(rolling_forecast(t, X, Z, Inputs::zeros(1, 0), 5, 10), ConfigError);
}

TEST(RelativeError, MatchesDefinition) {
    Eigen::MatrixXd truth(2, 3), pred(2, 3);
    truth << 1, 2, 2, 0, 0, 0;
    pred << 1, 2, 3, 1, 0, 0;
    const auto e = relative_error(truth, pred);
    EXPECT_DOUBLE_EQ(e.values(0), 1.0 / 3.0);
    EXPECT_TRUE(std::isnan(e.values(1)));
    EXPECT_FALSE(e.undefined[0]);
    EXPECT_TRUE(e.undefined[1]);
    EXPECT_THROW(relative_error(truth, Eigen::MatrixXd::Zero(2, 2)), DimensionError);
}

TEST(RelativeError, UndefinedChannelsLeaveTheMean) {
    Params t = Params::zeros(2, 0, 0);
    t.alpha_obs << 0.5, 0.5;
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 20);
    X.row(0).setOnes();
    const auto rep = rolling_forecast(t, X, Eigen::MatrixXd(0, 19), Inputs::zeros(0, 0), 2, 10);
    EXPECT_TRUE(rep.undefined[1]);
    EXPECT_DOUBLE_EQ(rep.mean_error, rep.per_node_error(0));
}

TEST(Dfa, WhiteNoiseAndRandomWalk) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    const Index T = 4000;
    Eigen::MatrixXd s(3, T);
    double walk = 0.0;
    for (Index k = 0; k < T; ++k) {
        s(0, k) = nd(rng);
        walk += nd(rng);
        s(1, k) = walk;
        s(2, k) = 3.0;
    }
    const auto est = estimate_fractional_orders(s);
    EXPECT_NEAR(est.alphas(0), 0.0, 0.1);
    EXPECT_NEAR(est.hurst(0), 0.5, 0.1);
    EXPECT_NEAR(est.alphas(1), 1.0, 0.15);
    EXPECT_TRUE(est.degenerate[2]);
    EXPECT_EQ(est.alphas(2), 0.0);
    EXPECT_FALSE(est.degenerate[0]);
}

TEST(Comparison, WinRateCountsTiesAsWins) {
    ComparisonRow row;
    for (double w : {1.0, 2.0, 3.0, 4.0}) {
        SeedComparison s;
        s.mean_with = w;
        s.mean_without = 2.0;
        s.em_converged = w < 3.0;
        row.seeds.push_back(s);
    }
    EXPECT_DOUBLE_EQ(row.win_rate(), 0.5);
    EXPECT_DOUBLE_EQ(row.converged_fraction(), 0.5);
    SweepPosition pos;
    pos.with_latent = {1.0, 2.0, 3.0};
    pos.without_latent = {2.0, 2.0, 2.0};
    EXPECT_EQ(pos.wins(), 2);
    EXPECT_DOUBLE_EQ(pos.mean_with(), 2.0);
}

TEST(Comparison, SmallRunIsDeterministicAndShaped) {
    const Network net = three_node_network();
    const DataProvider data = [&](std::uint64_t seed) { return net.simulate(81, seed); };
    ComparisonOptions o;
    o.n_seeds = 2;
    o.em.max_iter = 10;
    const Eigen::VectorXd ao = net.alphas.head(2), al = net.alphas.tail(1);
    const auto a = run_latent_comparison(data, {0, 1}, {2}, ao, al, o);
    const auto b = run_latent_comparison(data, {0, 1}, {2}, ao, al, o);
    ASSERT_EQ(a.seeds.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(a.seeds[i].seed, i);
        EXPECT_EQ(a.seeds[i].with_latent, b.seeds[i].with_latent);
        EXPECT_EQ(a.seeds[i].without_latent.size(), 2);
    }
    EXPECT_THROW(run_latent_comparison(data, {0, 1}, {1}, ao, al, o), ConfigError);
}

TEST(SweepSpec, Validation) {
    SweepSpec s{{0, 1}, {3, 2}, {2, 3, 4}};
    EXPECT_NO_THROW(s.validate(5));
    EXPECT_EQ(s.positions(), 3);
    EXPECT_EQ(s.observed_at(1), (std::vector<Index>{0, 1, 3}));
    EXPECT_EQ(s.hidden_at(1), (std::vector<Index>{2, 4}));
    EXPECT_EQ(s.hidden_at(2), (std::vector<Index>{4}));
    EXPECT_THROW((SweepSpec{{0, 1}, {3}, {1, 3}}).validate(5), ConfigError);
    EXPECT_THROW((SweepSpec{{0}, {5}, {2}}).validate(5), ConfigError);
    EXPECT_THROW((SweepSpec{{0}, {2, 2}, {2}}).validate(5), ConfigError);
    EXPECT_THROW((SweepSpec{{0}, {}, {7}}).validate(5), DataError);
    EXPECT_THROW((SweepSpec{{}, {}, {2}}).validate(5), ConfigError);
}
