#ifndef FRACNET_EM_HPP
#define FRACNET_EM_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracnet/error.hpp"
#include "fracnet/fracops.hpp"
#include "fracnet/inputs.hpp"
#include "fracnet/kalman.hpp"
#include "fracnet/linalg.hpp"
#include "fracnet/model.hpp"

namespace fracnet {

/// E-step quantities over a record x_0 .. x_N: filtered latent means/covariances for
/// k = 0 .. N - 1 (k = 0 is the prior) and inputs u_1 .. u_{N-1}.
template <typename Scalar>
struct EStep {
    MatrixX<Scalar> observed;             // n x (N + 1)
    MatrixX<Scalar> latents;              // m x N
    std::vector<MatrixX<Scalar>> covs;    // N entries, m x m
    InputSequence<Scalar> inputs;         // p x (N - 1)
    VectorX<Scalar> alpha_obs, alpha_lat;
    std::optional<Index> memory_horizon;

    Index N() const { return observed.cols() - 1; }

    static EStep from_filter(const MatrixX<Scalar>& observed, const FilterResult<Scalar>& filter,
                             const InputSequence<Scalar>& inputs, const VectorX<Scalar>& alpha_obs,
                             const VectorX<Scalar>& alpha_lat, std::optional<Index> memory_horizon = std::nullopt) {
        EStep e;
        e.observed = observed;
        e.latents = filter.means_with_prior();
        e.covs.reserve(std::size_t(filter.steps() + 1));
        for (Index k = 0; k <= filter.steps(); ++k)
            e.covs.push_back(filter.cov(k));
        e.inputs = inputs;
        e.alpha_obs = alpha_obs;
        e.alpha_lat = alpha_lat;
        e.memory_horizon = memory_horizon;
        return e;
    }
};

/// Expected second moments entering the Q function.
///
/// Observed block (k = 1 .. N), regressor r_k = [x_{k-1}; ẑ_{k-1}; u_{k-1}]:
///   G1 = sum E[r r^T], C1 = sum E[r x̊_k^T], Sxx = sum x̊_k x̊_k^T.
/// Latent block (k = 1 .. N - 1), target Delta^alpha z_k:
///   G2 = sum E[r r^T], C2 = sum E[r (Delta z_k)^T], Szz = sum E[Delta z_k (Delta z_k)^T].
template <typename Scalar>
struct SufficientStats {
    MatrixX<Scalar> G1, C1, Sxx;
    MatrixX<Scalar> G2, C2, Szz;
    Scalar count1 = 0, count2 = 0;
    Index n = 0, m = 0, p = 0;
    VectorX<Scalar> alpha_obs, alpha_lat;
};

template <typename Scalar>
SufficientStats<Scalar> sufficient_stats(const EStep<Scalar>& e) {
    const Index n = e.observed.rows(), m = e.latents.rows(), p = e.inputs.dims();
    const Index N = e.N();
    if (N < 2)
        throw DimensionError("sufficient_stats: need N >= 2");
    if (e.latents.cols() != N || Index(e.covs.size()) != N)
        throw DimensionError("sufficient_stats: latent moments must cover k = 0 .. N-1");
    if (e.inputs.steps() != 0 && e.inputs.steps() != N - 1)
        throw DimensionError("sufficient_stats: inputs must be p x (N-1)");
    if (e.alpha_obs.size() != n || e.alpha_lat.size() != m)
        throw DimensionError("sufficient_stats: fractional order dimensions");

    const Index T = N + 1;
    const Index J = memory_horizon_for(T, e.memory_horizon);
    const GLKernel<Scalar> obs_kernel(e.alpha_obs, J);
    const GLKernel<Scalar> lat_kernel(e.alpha_lat, J);
    const MatrixX<Scalar> xdiff = frac_diff(e.observed, obs_kernel, Memory::truncated);
    const MatrixX<Scalar> zdiff = frac_diff(e.latents, lat_kernel, Memory::truncated);
    const VectorX<Scalar> psi1 = J >= 1 ? VectorX<Scalar>(lat_kernel.psi(1)) : VectorX<Scalar>::Zero(m);

    const Index d = n + m + p;
    SufficientStats<Scalar> s;
    s.n = n;
    s.m = m;
    s.p = p;
    s.alpha_obs = e.alpha_obs;
    s.alpha_lat = e.alpha_lat;
    s.G1 = MatrixX<Scalar>::Zero(d, d);
    s.C1 = MatrixX<Scalar>::Zero(d, n);
    s.Sxx = MatrixX<Scalar>::Zero(n, n);
    s.G2 = MatrixX<Scalar>::Zero(d, d);
    s.C2 = MatrixX<Scalar>::Zero(d, m);
    s.Szz = MatrixX<Scalar>::Zero(m, m);
    s.count1 = Scalar(N);
    s.count2 = Scalar(N - 1);

    VectorX<Scalar> r(d);
    for (Index k = 1; k <= N; ++k) {
        r << e.observed.col(k - 1), e.latents.col(k - 1), e.inputs.at(k - 1);
        MatrixX<Scalar> outer = r * r.transpose();
        outer.block(n, n, m, m) += e.covs[std::size_t(k - 1)];
        const VectorX<Scalar> xk = xdiff.col(k);
        s.G1 += outer;
        s.C1.noalias() += r * xk.transpose();
        s.Sxx.noalias() += xk * xk.transpose();
        if (k <= N - 1 && m > 0) {
            const VectorX<Scalar> zk = zdiff.col(k);
            s.G2 += outer;
            s.C2.noalias() += r * zk.transpose();
            // Cov(z_{k-1}, Delta z_k) = P̂_{k-1} Psi_1^T under uncorrelated past errors.
            s.C2.block(n, 0, m, m) += e.covs[std::size_t(k - 1)] * psi1.asDiagonal();
            s.Szz.noalias() += zk * zk.transpose();
            for (Index j = 0; j <= std::min(k, J); ++j) {
                const auto psi = lat_kernel.psi(j);
                s.Szz += (psi * psi.transpose()).cwiseProduct(e.covs[std::size_t(k - j)]);
            }
        }
    }
    if (m == 0) {
        s.G2.setZero();
    }
    return s;
}

template <typename Scalar>
struct MStepResult {
    ModelParams<Scalar> theta;
    bool regularized = false;  // a ridge was needed for a singular Gram matrix
};

struct MStepOptions {
    double sigma_floor = 1e-10;
    double ridge = 1e-8;             // relative to trace(G) / dim
    bool raw_sigma1_update = false;  // keep the asymmetric residual-times-target form for Sigma1
};

namespace detail {
// Solves G X = C for symmetric PSD G, falling back to a trace-scaled ridge when G is singular.
template <typename Scalar>
MatrixX<Scalar> solve_normal_equations(const MatrixX<Scalar>& G, const MatrixX<Scalar>& C, double ridge,
                                       bool& regularized) {
    const Index d = G.rows();
    if (d == 0)
        return MatrixX<Scalar>(0, C.cols());
    Eigen::LDLT<MatrixX<Scalar>> ldlt(symmetrized(G));
    const auto D = ldlt.vectorD();
    const Scalar dmax = D.cwiseAbs().maxCoeff();
    if (ldlt.info() == Eigen::Success && D.allFinite() && dmax > Scalar(0)
        && D.minCoeff() > Scalar(kPivotThreshold) * dmax)
        return ldlt.solve(C);
    regularized = true;
    const Scalar scale = G.trace() > Scalar(0) ? G.trace() / Scalar(d) : Scalar(1);
    MatrixX<Scalar> Gr = symmetrized(G);
    Gr.diagonal().array() += Scalar(ridge) * scale;
    return Eigen::LDLT<MatrixX<Scalar>>(Gr).solve(C);
}

// Expected residual second moment S - Θ C - (Θ C)^T + Θ G Θ^T for coefficients Θ (rows = outputs).
template <typename Scalar>
MatrixX<Scalar> residual_moment(const MatrixX<Scalar>& S, const MatrixX<Scalar>& C, const MatrixX<Scalar>& G,
                                const MatrixX<Scalar>& Theta) {
    const MatrixX<Scalar> tc = Theta * C;
    return S - tc - tc.transpose() + Theta * G * Theta.transpose();
}
} // namespace detail

/// Coefficient blocks stacked as Θ1 = [A11 A12 B1] and Θ2 = [A21 A22 B2].
template <typename Scalar>
MatrixX<Scalar> observed_coefficients(const ModelParams<Scalar>& t) {
    MatrixX<Scalar> th(t.n(), t.n() + t.m() + t.p());
    th << t.A11, t.A12, t.B1;
    return th;
}

template <typename Scalar>
MatrixX<Scalar> latent_coefficients(const ModelParams<Scalar>& t) {
    MatrixX<Scalar> th(t.m(), t.n() + t.m() + t.p());
    th << t.A21, t.A22, t.B2;
    return th;
}

/// Closed-form maximizer of the Q function: block normal equations for the coupling/input
/// matrices, then the expected residual second moments for Sigma1 / Sigma2.
template <typename Scalar>
MStepResult<Scalar> m_step(const SufficientStats<Scalar>& s, const MStepOptions& options = {}) {
    const Index n = s.n, m = s.m, p = s.p;
    MStepResult<Scalar> out;
    auto& t = out.theta;

    const MatrixX<Scalar> th1 = detail::solve_normal_equations(s.G1, s.C1, options.ridge, out.regularized).transpose();
    t.A11 = th1.leftCols(n);
    t.A12 = th1.middleCols(n, m);
    t.B1 = th1.rightCols(p);
    if (options.raw_sigma1_update)
        t.Sigma1 = (s.Sxx - th1 * s.C1) / s.count1;
    else
        t.Sigma1 = floor_eigenvalues(MatrixX<Scalar>(detail::residual_moment(s.Sxx, s.C1, s.G1, th1) / s.count1),
                                     Scalar(options.sigma_floor));

    if (m > 0) {
        const MatrixX<Scalar> th2 =
            detail::solve_normal_equations(s.G2, s.C2, options.ridge, out.regularized).transpose();
        t.A21 = th2.leftCols(n);
        t.A22 = th2.middleCols(n, m);
        t.B2 = th2.rightCols(p);
        t.Sigma2 = floor_eigenvalues(MatrixX<Scalar>(detail::residual_moment(s.Szz, s.C2, s.G2, th2) / s.count2),
                                     Scalar(options.sigma_floor));
    } else {
        t.A21.resize(0, n);
        t.A22.resize(0, 0);
        t.B2.resize(0, p);
        t.Sigma2.resize(0, 0);
    }
    t.alpha_obs = s.alpha_obs;
    t.alpha_lat = s.alpha_lat;
    return out;
}

template <typename Scalar>
MStepResult<Scalar> m_step(const EStep<Scalar>& e, const MStepOptions& options = {}) {
    return m_step(sufficient_stats(e), options);
}

/// Expected complete-data log-likelihood with additive constants dropped:
///   -(N/2) log|Sigma1| - ((N-1)/2) log|Sigma2| - tr(Sigma1^{-1} S1)/2 - tr(Sigma2^{-1} S2)/2,
/// S1, S2 the expected residual second moments under theta.
template <typename Scalar>
Scalar q_value(const ModelParams<Scalar>& theta, const SufficientStats<Scalar>& s) {
    if (theta.n() != s.n || theta.m() != s.m || theta.p() != s.p)
        throw DimensionError("q_value: parameter and statistic dimensions differ");
    const MatrixX<Scalar> S1 = detail::residual_moment(s.Sxx, s.C1, s.G1, observed_coefficients(theta));
    Scalar q = -s.count1 / Scalar(2) * log_det_spd(theta.Sigma1, "q_value: Sigma1")
               - (spd_inverse(theta.Sigma1, "q_value: Sigma1") * S1).trace() / Scalar(2);
    if (s.m > 0) {
        const MatrixX<Scalar> S2 = detail::residual_moment(s.Szz, s.C2, s.G2, latent_coefficients(theta));
        q += -s.count2 / Scalar(2) * log_det_spd(theta.Sigma2, "q_value: Sigma2")
             - (spd_inverse(theta.Sigma2, "q_value: Sigma2") * S2).trace() / Scalar(2);
    }
    return q;
}

template <typename Scalar>
Scalar q_value(const ModelParams<Scalar>& theta, const EStep<Scalar>& e) {
    return q_value(theta, sufficient_stats(e));
}

/// Change of latent coordinates z' = diag(scale) z. The observed-channel model is unchanged.
template <typename Scalar>
ModelParams<Scalar> rescale_latent(const ModelParams<Scalar>& theta, const VectorX<Scalar>& scale) {
    if (scale.size() != theta.m())
        throw DimensionError("rescale_latent: one scale per latent channel required");
    if (!(scale.array() > Scalar(0)).all())
        throw ConfigError("rescale_latent: scales must be positive");
    ModelParams<Scalar> out = theta;
    const VectorX<Scalar> inv = scale.cwiseInverse();
    out.A12 = theta.A12 * inv.asDiagonal();
    out.A21 = scale.asDiagonal() * theta.A21;
    out.A22 = scale.asDiagonal() * theta.A22 * inv.asDiagonal();
    out.B2 = scale.asDiagonal() * theta.B2;
    out.Sigma2 = symmetrized(MatrixX<Scalar>(scale.asDiagonal() * theta.Sigma2 * scale.asDiagonal()));
    return out;
}

/// Scales that bring the latent noise covariance to unit diagonal.
template <typename Scalar>
VectorX<Scalar> unit_noise_scale(const ModelParams<Scalar>& theta) {
    return theta.Sigma2.diagonal().cwiseSqrt().cwiseInverse();
}

enum class Acceleration {
    none,     // plain fixed-point iteration
    squarem,  // squared extrapolation over (Theta, inputs); same fixed points as the plain map
};

/// EM settings. The loop stops once `patience` successive Q changes satisfy |ΔQ| < rel_tol |Q|.
struct EMConfig {
    std::optional<double> lambda;  // L1 input weight; default 0.1 lambda_max at the first timestep
    int max_iter = 200;            // counts every E-step + M-step evaluation
    double rel_tol = 1e-6;
    int patience = 5;              // successive Q changes that must all fall below rel_tol |Q|
    Acceleration acceleration = Acceleration::squarem;
    std::uint64_t seed = 0;
    double init_range = 1.0;
    double input_tol = 1e-9;
    int input_max_iter = 2000;
    std::optional<Index> memory_horizon;
    // After each M-step, rescale latent coordinates so that diag(Sigma2) = 1.
    bool normalize_latent_scale = true;
    // Starting point; replaces the random initialization when set.
    std::optional<Params> initial;
    MStepOptions mstep;
};

struct FitReport {
    Params theta_final;
    std::vector<double> q_trace;
    std::vector<Params> theta_trace;  // parameters after each E-step + M-step evaluation
    Eigen::MatrixXd z_hat_final;  // m x (N-1), ẑ_1 .. ẑ_{N-1} under theta_final
    Inputs inputs_final;
    int iterations = 0;
    bool converged = false;
    bool regularized = false;
    Index input_nonconverged = 0;
    double lambda = 0.0;
    EMConfig config;
};

/// Random initial parameters: coupling/input entries uniform in [-range, range], unit covariances.
Params initial_params(Index n, Index m, Index p, const Eigen::VectorXd& alpha_obs, const Eigen::VectorXd& alpha_lat,
                      double range, std::uint64_t seed);

namespace detail {
Eigen::VectorXd pack_state(const Params& theta, const Inputs& inputs);
void unpack_state(const Eigen::VectorXd& state, Params& theta, Inputs& inputs);
bool admissible(const Params& theta);
} // namespace detail

/// EM over filtered latents and sparse inputs. `observed` holds x_0 .. x_N.
FitReport fit(const Eigen::MatrixXd& observed, const Eigen::VectorXd& alpha_obs, const Eigen::VectorXd& alpha_lat,
              Index m, Index p, const EMConfig& config = {});

} // namespace fracnet

#endif // FRACNET_EM_HPP
