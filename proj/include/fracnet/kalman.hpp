#ifndef FRACNET_KALMAN_HPP
#define FRACNET_KALMAN_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracnet/error.hpp"
#include "fracnet/fracops.hpp"
#include "fracnet/linalg.hpp"
#include "fracnet/model.hpp"

namespace fracnet {

/// Output of the fractional Kalman filter over a record x_0 .. x_N (N + 1 columns).
///
/// Column k - 1 of z_hat / z_tilde / innovations and entry k - 1 of the covariance
/// sequences belong to time k, for k = 1 .. N - 1. The prior (z_0, P_0) is kept alongside.
template <typename Scalar>
struct FilterResult {
    MatrixX<Scalar> z_hat;
    std::vector<MatrixX<Scalar>> P_hat;
    MatrixX<Scalar> z_tilde;
    std::vector<MatrixX<Scalar>> P_tilde;
    std::vector<MatrixX<Scalar>> gains;
    MatrixX<Scalar> innovations;
    VectorX<Scalar> z_init;
    MatrixX<Scalar> P_init;

    Index steps() const { return z_hat.cols(); }

    /// ẑ_k for 0 <= k <= steps(); k = 0 is the prior mean.
    VectorX<Scalar> mean(Index k) const { return k == 0 ? z_init : VectorX<Scalar>(z_hat.col(k - 1)); }
    const MatrixX<Scalar>& cov(Index k) const { return k == 0 ? P_init : P_hat[std::size_t(k - 1)]; }

    /// [ẑ_0 ẑ_1 .. ẑ_{N-1}] as one m x N matrix.
    MatrixX<Scalar> means_with_prior() const {
        MatrixX<Scalar> out(z_init.size(), z_hat.cols() + 1);
        out.col(0) = z_init;
        out.rightCols(z_hat.cols()) = z_hat;
        return out;
    }
};

/// Fractional Kalman filter for the latent block.
///
/// For k = 1 .. N - 1:
///   z̃_k = A22 ẑ_{k-1} + A21 x_{k-1} + B2 u_{k-1} - sum_{j>=1} Psi2_j ẑ_{k-j}
///   P̃_k = (A22 - Psi2_1) P̂_{k-1} (A22 - Psi2_1)^T + sum_{j>=2} Psi2_j P̂_{k-j} Psi2_j^T + Sigma2
///   y_k = x̊_{k+1} - A11 x_k - B1 u_k
///   K_k = P̃_k A12^T (Sigma1 + A12 P̃_k A12^T)^{-1}
///   ẑ_k = z̃_k + K_k (y_k - A12 z̃_k),  P̂_k = (A12^T Sigma1^{-1} A12 + P̃_k^{-1})^{-1}
///
/// Past estimation errors are treated as mutually uncorrelated, so the long-memory
/// covariance terms add without cross products.
template <typename Scalar>
FilterResult<Scalar> run_filter(const ModelParams<Scalar>& params, const MatrixX<Scalar>& observed,
                                const InputSequence<Scalar>& inputs, const VectorX<Scalar>& z0,
                                const MatrixX<Scalar>& P0, std::optional<Index> memory_horizon = std::nullopt) {
    params.validate();
    const Index n = params.n(), m = params.m();
    const Index T = observed.cols();
    if (observed.rows() != n)
        throw DimensionError("run_filter: observed has " + std::to_string(observed.rows()) + " channels, model has "
                             + std::to_string(n));
    if (T < 3)
        throw DimensionError("run_filter: need at least 3 samples (N >= 2)");
    if (inputs.dims() != params.p() || (inputs.steps() != 0 && inputs.steps() != T - 2))
        throw DimensionError("run_filter: input sequence must be p x (N-1)");
    if (z0.size() != m || P0.rows() != m || P0.cols() != m)
        throw DimensionError("run_filter: initial latent mean/covariance dimensions");
    require_psd(P0, "run_filter: P0");

    const Index N = T - 1;
    const Index J = memory_horizon_for(T, memory_horizon);
    const GLKernel<Scalar> obs_kernel(params.alpha_obs, J);
    const GLKernel<Scalar> lat_kernel(params.alpha_lat, J);
    const MatrixX<Scalar> xdiff = frac_diff(observed, obs_kernel, Memory::truncated);

    FilterResult<Scalar> r;
    r.z_init = z0;
    r.P_init = P0;
    r.z_hat.resize(m, N - 1);
    r.z_tilde.resize(m, N - 1);
    r.innovations.resize(n, N - 1);
    r.P_hat.reserve(std::size_t(N - 1));
    r.P_tilde.reserve(std::size_t(N - 1));
    r.gains.reserve(std::size_t(N - 1));

    MatrixX<Scalar> decay = params.A22;
    if (J >= 1)
        decay.diagonal() -= lat_kernel.psi(1);
    const MatrixX<Scalar> sigma1_inv = m > 0 ? spd_inverse(params.Sigma1, "run_filter: Sigma1") : MatrixX<Scalar>();
    const MatrixX<Scalar> info_gain = m > 0 ? MatrixX<Scalar>(params.A12.transpose() * sigma1_inv * params.A12)
                                            : MatrixX<Scalar>(0, 0);

    for (Index k = 1; k <= N - 1; ++k) {
        const Index lags = std::min(k, J);
        VectorX<Scalar> zt = params.A22 * r.mean(k - 1) + params.A21 * observed.col(k - 1)
                             + params.B2 * inputs.at(k - 1);
        for (Index j = 1; j <= lags; ++j)
            zt -= lat_kernel.psi(j).cwiseProduct(r.mean(k - j));

        MatrixX<Scalar> Pt = decay * r.cov(k - 1) * decay.transpose() + params.Sigma2;
        for (Index j = 2; j <= lags; ++j) {
            const auto psi = lat_kernel.psi(j);
            Pt += (psi * psi.transpose()).cwiseProduct(r.cov(k - j));
        }
        Pt = symmetrized(Pt);

        const VectorX<Scalar> y = xdiff.col(k + 1) - params.A11 * observed.col(k) - params.B1 * inputs.at(k);
        const VectorX<Scalar> innovation = y - params.A12 * zt;

        MatrixX<Scalar> gain(m, n);
        VectorX<Scalar> zh = zt;
        MatrixX<Scalar> Ph = Pt;
        if (m > 0) {
            const MatrixX<Scalar> S = params.Sigma1 + params.A12 * Pt * params.A12.transpose();
            MatrixX<Scalar> S_inv;
            MatrixX<Scalar> Pt_inv;
            try {
                S_inv = spd_inverse(S, "innovation covariance");
                Pt_inv = spd_inverse(Pt, "predicted covariance");
            } catch (const SingularSystemError& e) {
                throw SingularSystemError(std::string("run_filter: ") + e.what() + " at timestep "
                                          + std::to_string(k));
            }
            gain = Pt * params.A12.transpose() * S_inv;
            zh = zt + gain * innovation;
            try {
                Ph = spd_inverse(MatrixX<Scalar>(info_gain + Pt_inv), "posterior information");
            } catch (const SingularSystemError& e) {
                throw SingularSystemError(std::string("run_filter: ") + e.what() + " at timestep "
                                          + std::to_string(k));
            }
        }

        r.z_tilde.col(k - 1) = zt;
        r.z_hat.col(k - 1) = zh;
        r.innovations.col(k - 1) = innovation;
        r.P_tilde.push_back(Pt);
        r.P_hat.push_back(symmetrized(Ph));
        r.gains.push_back(gain);
    }
    return r;
}

} // namespace fracnet

#endif // FRACNET_KALMAN_HPP
