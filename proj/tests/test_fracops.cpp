#include <random>

#include <gtest/gtest.h>

#include "fracnet/fracops.hpp"
#include "oracles.hpp"

using namespace fracnet;

TEST(GlCoeff, TrivialValues) {
    EXPECT_DOUBLE_EQ(gl_coeff(0.7, 0), 1.0);
    EXPECT_DOUBLE_EQ(gl_coeff(0.7, 1), -0.7);
    EXPECT_NEAR(gl_coeff(0.5, 2), -0.125, 1e-15);
}

TEST(GlCoeff, MatchesLogGammaFormula) {
    for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.8, 1.1, 1.5, 2.3}) {
        for (int j = 0; j <= 100; ++j) {
            const double expected = oracle::gl_coeff_lgamma(alpha, j);
            EXPECT_NEAR(gl_coeff(alpha, j), expected, 1e-10 * std::abs(expected)) << "alpha=" << alpha << " j=" << j;
        }
    }
}

TEST(GLKernel, InvariantsHold) {
    Eigen::VectorXd alphas(4);
    alphas << 0.25, 0.7, 1.0, 1.8;
    const auto k = build_kernel(alphas, 40);
    for (Index i = 0; i < alphas.size(); ++i) {
        EXPECT_EQ(k(i, 0), 1.0);
        EXPECT_EQ(k(i, 1), -alphas(i));
        for (Index j = 1; j <= 40; ++j)
            EXPECT_EQ(k(i, j), k(i, j - 1) * ((double(j) - 1.0 - alphas(i)) / double(j)));
    }
    for (Index j = 2; j <= 40; ++j)
        EXPECT_EQ(k(2, j), 0.0);
}

TEST(GLKernel, ClassicalOrders) {
    const auto first = build_kernel(Eigen::VectorXd::Constant(1, 1.0), 3);
    const auto ident = build_kernel(Eigen::VectorXd::Constant(1, 0.0), 3);
    const double d1[] = {1, -1, 0, 0}, d0[] = {1, 0, 0, 0};
    for (Index j = 0; j <= 3; ++j) {
        EXPECT_EQ(first(0, j), d1[j]);
        EXPECT_EQ(ident(0, j), d0[j]);
    }
}

TEST(GLKernel, ThreeOrderTableMatchesOracle) {
    Eigen::VectorXd alphas(3);
    alphas << 0.7, 1.1, 0.8;
    const auto k = build_kernel(alphas, 50);
    for (Index i = 0; i < 3; ++i)
        for (int j = 0; j <= 50; ++j) {
            const double expected = oracle::gl_coeff_lgamma(alphas(i), j);
            EXPECT_NEAR(k(i, j), expected, 1e-10 * std::abs(expected));
        }
}

TEST(GLKernel, RejectsNegativeHorizon) {
    EXPECT_THROW(build_kernel(Eigen::VectorXd::Constant(1, 0.5), -1), DimensionError);
}

TEST(FracDiff, FirstDifferenceAndIdentity) {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd x = oracle::random_matrix(rng, 2, 9);
    const auto d1 = frac_diff(x, build_kernel(Eigen::VectorXd::Constant(2, 1.0), 8));
    EXPECT_EQ(d1.col(0), x.col(0));
    for (Index k = 1; k < 9; ++k)
        EXPECT_EQ(d1.col(k), x.col(k) - x.col(k - 1));
    EXPECT_EQ(frac_diff(x, build_kernel(Eigen::VectorXd::Zero(2), 8)), x);
}

TEST(FracDiff, MatchesBruteForceConvolution) {
    std::mt19937_64 rng(11);
    const Eigen::MatrixXd x = oracle::random_matrix(rng, 2, 6);
    Eigen::VectorXd alphas(2);
    alphas << 0.3, 0.9;
    const Eigen::MatrixXd expected = oracle::frac_diff_bruteforce(x, alphas);
    EXPECT_LT((frac_diff(x, build_kernel(alphas, 5)) - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(FracDiff, IsLinear) {
    std::mt19937_64 rng(5);
    Eigen::VectorXd alphas(3);
    alphas << 0.4, 0.95, 1.3;
    const auto k = build_kernel(alphas, 29);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd X = oracle::random_matrix(rng, 3, 30), Y = oracle::random_matrix(rng, 3, 30);
        const double a = 1.7, b = -0.6;
        const Eigen::MatrixXd lhs = frac_diff(Eigen::MatrixXd(a * X + b * Y), k);
        const Eigen::MatrixXd rhs = a * frac_diff(X, k) + b * frac_diff(Y, k);
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(FracDiff, ShortKernelNeedsTruncation) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 10);
    const auto k = build_kernel(Eigen::VectorXd::Constant(1, 0.5), 3);
    EXPECT_THROW(frac_diff(x, k), DimensionError);
    const Eigen::MatrixXd t = frac_diff(x, k, Memory::truncated);
    const double tail = k(0, 0) + k(0, 1) + k(0, 2) + k(0, 3);
    EXPECT_NEAR(t(0, 9), tail, 1e-15);
}

TEST(FracDiff, ChannelMismatchThrows) {
    EXPECT_THROW(frac_diff(Eigen::MatrixXd::Ones(2, 4), build_kernel(Eigen::VectorXd::Zero(3), 3)), DimensionError);
}

TEST(MemoryHorizon, FullOrCapped) {
    EXPECT_EQ(memory_horizon_for(10, std::nullopt), 9);
    EXPECT_EQ(memory_horizon_for(10, 4), 4);
    EXPECT_EQ(memory_horizon_for(10, 40), 9);
}
