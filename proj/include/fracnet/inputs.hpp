#ifndef FRACNET_INPUTS_HPP
#define FRACNET_INPUTS_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracnet/error.hpp"
#include "fracnet/fracops.hpp"
#include "fracnet/kalman.hpp"
#include "fracnet/linalg.hpp"
#include "fracnet/model.hpp"

namespace fracnet {

/// One timestep of the sparse input estimate:
///   min_u (a1 - B1 u)^T W1 (a1 - B1 u) + (a2 - B2 u)^T W2 (a2 - B2 u) + lambda ||u||_1
template <typename Scalar>
struct InputProblem {
    VectorX<Scalar> a1, a2;
    MatrixX<Scalar> B1, B2;
    MatrixX<Scalar> W1, W2;
    Scalar lambda = 0;

    Index dims() const { return B1.cols(); }

    MatrixX<Scalar> hessian() const { return B1.transpose() * W1 * B1 + B2.transpose() * W2 * B2; }
    VectorX<Scalar> linear_term() const { return B1.transpose() * W1 * a1 + B2.transpose() * W2 * a2; }

    Scalar objective(const VectorX<Scalar>& u) const {
        const VectorX<Scalar> v1 = a1 - B1 * u;
        const VectorX<Scalar> v2 = a2 - B2 * u;
        return v1.dot(W1 * v1) + v2.dot(W2 * v2) + lambda * u.template lpNorm<1>();
    }

    /// Smallest lambda for which u = 0 is optimal.
    Scalar lambda_max() const { return Scalar(2) * (dims() > 0 ? linear_term().cwiseAbs().maxCoeff() : Scalar(0)); }

    void validate() const {
        if (B1.rows() != a1.size() || B2.rows() != a2.size() || B2.cols() != B1.cols() || W1.rows() != a1.size()
            || W1.cols() != a1.size() || W2.rows() != a2.size() || W2.cols() != a2.size())
            throw DimensionError("InputProblem: inconsistent dimensions");
        if (!(lambda >= Scalar(0)))
            throw ConfigError("InputProblem: lambda must be >= 0");
        require_psd(W1, "InputProblem: W1");
        require_psd(W2, "InputProblem: W2");
    }
};

template <typename Scalar>
struct InputSolution {
    VectorX<Scalar> u;
    Scalar objective = 0;
    int iterations = 0;
    bool converged = false;
    std::vector<Scalar> objective_trace;  // filled when requested
};

template <typename Scalar>
Scalar soft_threshold(Scalar v, Scalar t) {
    using std::abs;
    return abs(v) <= t ? Scalar(0) : (v > 0 ? v - t : v + t);
}

namespace detail {
// Worst violation of the subgradient optimality condition at u.
template <typename Scalar>
Scalar stationarity_gap(const VectorX<Scalar>& grad, const VectorX<Scalar>& u, Scalar lambda) {
    using std::abs;
    Scalar worst = 0;
    for (Index i = 0; i < u.size(); ++i) {
        const Scalar gap = u(i) != Scalar(0) ? abs(grad(i) + (u(i) > 0 ? lambda : -lambda))
                                             : std::max(Scalar(0), abs(grad(i)) - lambda);
        worst = std::max(worst, gap);
    }
    return worst;
}
} // namespace detail

/// Proximal gradient (monotone FISTA) with step 1/L, L = largest eigenvalue of 2 (B1^T W1 B1 + B2^T W2 B2).
/// Stops once every coordinate satisfies the soft-threshold optimality condition within tol.
template <typename Scalar>
InputSolution<Scalar> solve_input(const InputProblem<Scalar>& problem, Scalar tol, int max_iter,
                                  bool record_trace = false,
                                  const std::optional<VectorX<Scalar>>& warm_start = std::nullopt) {
    if (!(tol > Scalar(0)) || max_iter < 1)
        throw ConfigError("solve_input: tol must be > 0 and max_iter >= 1");
    problem.validate();
    const Index p = problem.dims();
    InputSolution<Scalar> sol;
    sol.u = VectorX<Scalar>::Zero(p);
    if (p == 0) {
        sol.objective = problem.objective(sol.u);
        sol.converged = true;
        return sol;
    }

    const MatrixX<Scalar> H = symmetrized(problem.hessian());
    const VectorX<Scalar> g = problem.linear_term();
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(H, Eigen::EigenvaluesOnly);
    const Scalar L = Scalar(2) * std::max(Scalar(0), eig.eigenvalues().maxCoeff());
    const Scalar lambda = problem.lambda;

    if (!(L > Scalar(0))) {
        if (lambda == Scalar(0))
            throw UnidentifiableInputError("solve_input: input maps vanish and lambda = 0; inputs are unidentifiable");
        sol.objective = problem.objective(sol.u);
        sol.converged = true;
        return sol;
    }

    auto gradient = [&](const VectorX<Scalar>& u) -> VectorX<Scalar> { return Scalar(2) * (H * u - g); };
    auto prox = [&](const VectorX<Scalar>& v) {
        VectorX<Scalar> out(v.size());
        for (Index i = 0; i < v.size(); ++i)
            out(i) = soft_threshold(v(i), lambda / L);
        return out;
    };

    VectorX<Scalar> x = warm_start && warm_start->size() == p ? *warm_start : VectorX<Scalar>::Zero(p);
    VectorX<Scalar> y = x;
    Scalar fx = problem.objective(x);
    Scalar t = 1;
    if (record_trace)
        sol.objective_trace.push_back(fx);

    for (int it = 1; it <= max_iter; ++it) {
        if (detail::stationarity_gap(gradient(x), x, lambda) <= tol) {
            sol.converged = true;
            sol.iterations = it - 1;
            break;
        }
        const VectorX<Scalar> z = prox(VectorX<Scalar>(y - gradient(y) / L));
        // f(z) - f(x) in difference form, accurate where both objectives agree to rounding.
        const VectorX<Scalar> step = z - x;
        const Scalar change = step.dot(H * (z + x) - Scalar(2) * g)
                              + lambda * (z.template lpNorm<1>() - x.template lpNorm<1>());
        const Scalar t_next = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
        const VectorX<Scalar> x_prev = x;
        if (change <= Scalar(0)) {
            x = z;
            fx += change;
        }
        y = x + (t / t_next) * (z - x) + ((t - Scalar(1)) / t_next) * (x - x_prev);
        t = t_next;
        if (record_trace)
            sol.objective_trace.push_back(fx);
        sol.iterations = it;
    }
    if (!sol.converged)
        sol.converged = detail::stationarity_gap(gradient(x), x, lambda) <= tol;
    sol.u = x;
    sol.objective = problem.objective(x);
    return sol;
}

template <typename Scalar>
struct InputEstimate {
    InputSequence<Scalar> inputs;
    Index nonconverged = 0;  // timesteps that hit max_iter
};

namespace detail {
// Problem for u_j, built from the residuals of the transition into sample j + 1.
template <typename Scalar>
InputProblem<Scalar> input_problem_at(const ModelParams<Scalar>& params, const MatrixX<Scalar>& observed,
                                      const MatrixX<Scalar>& xdiff, const MatrixX<Scalar>& latents,
                                      const GLKernel<Scalar>& lat_kernel, const MatrixX<Scalar>& W1,
                                      const MatrixX<Scalar>& W2, Index j, Scalar lambda) {
    InputProblem<Scalar> prob;
    prob.lambda = lambda;
    prob.B1 = params.B1;
    prob.W1 = W1;
    prob.a1 = xdiff.col(j + 1) - params.A11 * observed.col(j) - params.A12 * latents.col(j);
    if (j + 1 < latents.cols()) {
        prob.a2 = frac_diff_at(latents, lat_kernel, j + 1) - params.A21 * observed.col(j) - params.A22 * latents.col(j);
        prob.B2 = params.B2;
        prob.W2 = W2;
    } else {
        // No latent estimate exists one step past the record end.
        prob.a2.resize(0);
        prob.B2.resize(0, params.p());
        prob.W2.resize(0, 0);
    }
    return prob;
}
} // namespace detail

/// Heuristic default weight: one tenth of lambda_max for the first timestep.
template <typename Scalar>
Scalar default_lambda(const ModelParams<Scalar>& params, const MatrixX<Scalar>& observed,
                      const FilterResult<Scalar>& filter) {
    const Index T = observed.cols();
    if (params.p() == 0 || T < 3)
        return Scalar(0);
    const GLKernel<Scalar> obs_kernel(params.alpha_obs, T - 1);
    const GLKernel<Scalar> lat_kernel(params.alpha_lat, T - 1);
    const MatrixX<Scalar> xdiff = frac_diff(observed, obs_kernel);
    const MatrixX<Scalar> W1 = spd_inverse(params.Sigma1, "Sigma1");
    const MatrixX<Scalar> W2 = spd_inverse(params.Sigma2, "Sigma2");
    const auto prob = detail::input_problem_at(params, observed, xdiff, filter.means_with_prior(), lat_kernel, W1, W2,
                                               Index(1), Scalar(0));
    return Scalar(0.1) * prob.lambda_max();
}

/// Independent sparse input solve for every u_j, j = 1 .. N - 1, from the filtered latents.
template <typename Scalar>
InputEstimate<Scalar> estimate_all_inputs(const ModelParams<Scalar>& params, const MatrixX<Scalar>& observed,
                                          const FilterResult<Scalar>& filter, Scalar lambda, Scalar tol, int max_iter,
                                          std::optional<Index> memory_horizon = std::nullopt,
                                          const InputSequence<Scalar>* warm_start = nullptr) {
    const Index T = observed.cols();
    const Index N = T - 1;
    const Index p = params.p();
    InputEstimate<Scalar> est;
    est.inputs = InputSequence<Scalar>::zeros(p, std::max<Index>(N - 1, 0));
    if (p == 0 || N < 2)
        return est;
    if (filter.steps() != N - 1)
        throw DimensionError("estimate_all_inputs: filter output does not cover the record");

    const Index J = memory_horizon_for(T, memory_horizon);
    const GLKernel<Scalar> obs_kernel(params.alpha_obs, J);
    const GLKernel<Scalar> lat_kernel(params.alpha_lat, J);
    const MatrixX<Scalar> xdiff = frac_diff(observed, obs_kernel, Memory::truncated);
    const MatrixX<Scalar> latents = filter.means_with_prior();
    const MatrixX<Scalar> W1 = spd_inverse(params.Sigma1, "estimate_all_inputs: Sigma1");
    const MatrixX<Scalar> W2 = params.m() > 0 ? spd_inverse(params.Sigma2, "estimate_all_inputs: Sigma2")
                                              : MatrixX<Scalar>(0, 0);

    for (Index j = 1; j <= N - 1; ++j) {
        const auto prob = detail::input_problem_at(params, observed, xdiff, latents, lat_kernel, W1, W2, j, lambda);
        std::optional<VectorX<Scalar>> warm;
        if (warm_start && warm_start->dims() == p && warm_start->steps() == N - 1)
            warm = warm_start->values.col(j - 1);
        try {
            const auto sol = solve_input(prob, tol, max_iter, false, warm);
            est.inputs.values.col(j - 1) = sol.u;
            if (!sol.converged)
                ++est.nonconverged;
        } catch (const UnidentifiableInputError& e) {
            throw UnidentifiableInputError(std::string(e.what()) + " (timestep " + std::to_string(j) + ")");
        }
    }
    return est;
}

} // namespace fracnet

#endif // FRACNET_INPUTS_HPP
