#include <random>

#include <gtest/gtest.h>

#include "fracnet/kalman.hpp"
#include "fracnet/model.hpp"
#include "oracles.hpp"

using namespace fracnet;

namespace {

Params random_model(std::mt19937_64& rng, Index n, Index m, Index p) {
    Params t = Params::zeros(n, m, p);
    t.A11 = oracle::random_matrix(rng, n, n, 0.4);
    t.A12 = oracle::random_matrix(rng, n, m, 0.8);
    t.A21 = oracle::random_matrix(rng, m, n, 0.4);
    t.A22 = oracle::random_matrix(rng, m, m, 0.4);
    t.B1 = oracle::random_matrix(rng, n, p);
    t.B2 = oracle::random_matrix(rng, m, p);
    t.Sigma1 = 0.1 * oracle::random_spd(rng, n);
    t.Sigma2 = 0.1 * oracle::random_spd(rng, m);
    return t;
}

} // namespace

TEST(FractionalKalman, ZeroOrderMatchesClassicalFilter) {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        Params t = random_model(rng, 3, 2, 0);
        const Index T = 52;  // 50 filter steps
        const auto sim = simulate(t, T, std::uint64_t(trial));
        const Eigen::VectorXd z0 = oracle::random_matrix(rng, 2, 1).col(0);
        const Eigen::MatrixXd P0 = oracle::random_spd(rng, 2);
        const auto f = run_filter(t, sim.observed.values, Inputs::zeros(0, 0), z0, P0);
        const auto ref = oracle::classical_kalman(t.A11, t.A12, t.A21, t.A22, t.Sigma1, t.Sigma2,
                                                  sim.observed.values, z0, P0);
        ASSERT_EQ(f.steps(), 50);
        EXPECT_LT((f.z_hat - ref.z_hat).cwiseAbs().maxCoeff(), 1e-8);
        for (std::size_t k = 0; k < ref.P_hat.size(); ++k)
            EXPECT_LT((f.P_hat[k] - ref.P_hat[k]).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(FractionalKalman, ScalarRecursionByHand) {
    Params t = Params::zeros(1, 1, 0);
    t.A11(0, 0) = -0.2;
    t.A12(0, 0) = 0.9;
    t.A21(0, 0) = 0.3;
    t.A22(0, 0) = -0.1;
    t.Sigma1(0, 0) = 0.05;
    t.Sigma2(0, 0) = 0.2;
    t.alpha_obs(0) = 0.7;
    t.alpha_lat(0) = 0.6;
    const auto sim = simulate(t, 30, 5);
    const Eigen::MatrixXd x = sim.observed.values;
    const auto f = run_filter(t, x, Inputs::zeros(0, 0), Eigen::VectorXd::Zero(1).eval(),
                              Eigen::MatrixXd::Identity(1, 1).eval());

    auto psi = [](double a, int j) { return oracle::gl_coeff_lgamma(a, j); };
    const int N = 29;
    std::vector<double> zh(N), Ph(N);
    zh[0] = 0.0;
    Ph[0] = 1.0;
    const double a = 0.7, b = 0.6, s1 = 0.05, s2 = 0.2, h = 0.9;
    for (int k = 1; k <= N - 1; ++k) {
        double zt = -0.1 * zh[k - 1] + 0.3 * x(0, k - 1);
        for (int j = 1; j <= k; ++j)
            zt -= psi(b, j) * zh[k - j];
        const double d = -0.1 - psi(b, 1);
        double Pt = d * Ph[k - 1] * d + s2;
        for (int j = 2; j <= k; ++j)
            Pt += psi(b, j) * psi(b, j) * Ph[k - j];
        double xd = 0.0;
        for (int j = 0; j <= k + 1; ++j)
            xd += psi(a, j) * x(0, k + 1 - j);
        const double y = xd - (-0.2) * x(0, k);
        const double K = Pt * h / (s1 + h * Pt * h);
        zh[k] = zt + K * (y - h * zt);
        Ph[k] = 1.0 / (h * h / s1 + 1.0 / Pt);
        EXPECT_NEAR(f.z_hat(0, k - 1), zh[k], 1e-12 * (1.0 + std::abs(zh[k])));
        EXPECT_NEAR(f.P_hat[std::size_t(k - 1)](0, 0), Ph[k], 1e-12);
        EXPECT_NEAR(f.P_tilde[std::size_t(k - 1)](0, 0), Pt, 1e-12);
        EXPECT_NEAR(f.gains[std::size_t(k - 1)](0, 0), K, 1e-12);
    }
}

TEST(FractionalKalman, CovariancesAreConsistent) {
    std::mt19937_64 rng(7);
    Params t = random_model(rng, 3, 2, 1);
    t.alpha_obs << 0.7, 1.1, 0.8;
    t.alpha_lat << 0.5, 0.9;
    const auto sim = simulate(t, 60, 2);
    Inputs u{oracle::random_matrix(rng, 1, 58, 0.1)};
    const auto f = run_filter(t, sim.observed.values, u, Eigen::VectorXd::Zero(2).eval(),
                              Eigen::MatrixXd::Identity(2, 2).eval());
    const Eigen::MatrixXd s1inv = t.Sigma1.inverse();
    for (Index k = 0; k < f.steps(); ++k) {
        const auto& Ph = f.P_hat[std::size_t(k)];
        const auto& Pt = f.P_tilde[std::size_t(k)];
        EXPECT_TRUE(is_symmetric(Ph));
        EXPECT_GT(min_eigenvalue(Ph), 0.0);
        // Measurement update never adds uncertainty.
        EXPECT_GT(min_eigenvalue(Eigen::MatrixXd(Pt - Ph)), -1e-12);
        // Information-form identity K = P̂ A12^T Sigma1^{-1}.
        const Eigen::MatrixXd K2 = Ph * t.A12.transpose() * s1inv;
        EXPECT_LT((f.gains[std::size_t(k)] - K2).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(FractionalKalman, NoLatentsIsTrivial) {
    Params t = Params::zeros(2, 0, 0);
    t.alpha_obs << 0.5, 0.5;
    const auto sim = simulate(t, 10, 1);
    const auto f = run_filter(t, sim.observed.values, Inputs::zeros(0, 0), Eigen::VectorXd(0),
                              Eigen::MatrixXd(0, 0));
    EXPECT_EQ(f.z_hat.rows(), 0);
    EXPECT_EQ(f.steps(), 8);
}

TEST(FractionalKalman, RejectsBadInput) {
    Params t = Params::zeros(2, 1, 0);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 10);
    const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(1);
    const Eigen::MatrixXd P0 = Eigen::MatrixXd::Identity(1, 1);
    EXPECT_THROW(run_filter(t, Eigen::MatrixXd::Zero(3, 10).eval(), Inputs::zeros(0, 0), z0, P0), DimensionError);
    EXPECT_THROW(run_filter(t, Eigen::MatrixXd::Zero(2, 2).eval(), Inputs::zeros(0, 0), z0, P0), DimensionError);
    EXPECT_THROW(run_filter(t, x, Inputs::zeros(0, 0), z0, Eigen::MatrixXd::Constant(1, 1, -1.0).eval()),
                 NotPsdError);
    t.Sigma2.setZero();
    EXPECT_THROW(run_filter(t, x, Inputs::zeros(0, 0), z0, Eigen::MatrixXd::Zero(1, 1).eval()), SingularSystemError);
}
