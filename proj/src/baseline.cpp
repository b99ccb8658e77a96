#include <cmath>
#include <random>

#include "fracnet/em.hpp"
#include "fracnet/inputs.hpp"
#include "fracnet/model.hpp"

namespace fracnet {

Params BaselineFit::to_params(const Eigen::VectorXd& alpha_obs) const {
    Params t = Params::zeros(A.rows(), 0, B1.cols());
    t.A11 = A;
    t.B1 = B1;
    t.Sigma1 = Sigma1;
    t.alpha_obs = alpha_obs;
    return t;
}

namespace {

EStep<double> observed_only(const Eigen::MatrixXd& observed, const Eigen::VectorXd& alpha_obs, const Inputs& inputs,
                            std::optional<Index> memory_horizon) {
    const Index N = observed.cols() - 1;
    EStep<double> e;
    e.observed = observed;
    e.latents.resize(0, N);
    e.covs.assign(std::size_t(N), Eigen::MatrixXd(0, 0));
    e.inputs = inputs;
    e.alpha_obs = alpha_obs;
    e.alpha_lat.resize(0);
    e.memory_horizon = memory_horizon;
    return e;
}

void require_identifiable(const SufficientStats<double>& s) {
    const Index n = s.n;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s.G1.topLeftCorner(n, n));
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmax = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
    if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || d.minCoeff() <= kPivotThreshold * dmax)
        throw SingularSystemError("baseline_fit_no_latent: regressor Gram matrix is rank deficient");
}

} // namespace

BaselineFit baseline_fit_no_latent(const Eigen::MatrixXd& observed, const Eigen::VectorXd& alpha_obs,
                                   const BaselineOptions& options) {
    const Index n = observed.rows();
    const Index N = observed.cols() - 1;
    const Index p = options.p;
    if (alpha_obs.size() != n)
        throw DimensionError("baseline_fit_no_latent: one fractional order per observed channel required");
    if (!observed.allFinite())
        throw DataError("baseline_fit_no_latent: non-finite observation");
    if (N < n + p + 1 || N < 2)
        throw SingularSystemError("baseline_fit_no_latent: " + std::to_string(N) + " transitions cannot determine "
                                  + std::to_string(n + p) + " regressors");

    BaselineFit out;
    auto stats = sufficient_stats(observed_only(observed, alpha_obs, Inputs::zeros(0, N - 1), options.memory_horizon));
    require_identifiable(stats);
    auto ms = m_step(stats);
    out.A = ms.theta.A11;
    out.Sigma1 = ms.theta.Sigma1;
    out.B1 = Eigen::MatrixXd::Zero(n, p);
    out.inputs = Inputs::zeros(p, N - 1);
    out.iterations = 1;
    if (p == 0)
        return out;

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unif(-options.init_range, options.init_range);
    for (Index i = 0; i < out.B1.size(); ++i)
        out.B1.data()[i] = unif(rng);

    std::optional<double> lambda = options.lambda;
    double previous = out.Sigma1.trace();
    for (int it = 1; it <= options.max_iter; ++it) {
        Params theta = out.to_params(alpha_obs);
        theta.B1 = out.B1;
        FilterResult<double> empty;
        empty.z_hat.resize(0, N - 1);
        empty.z_init.resize(0);
        empty.P_init.resize(0, 0);
        empty.P_hat.assign(std::size_t(N - 1), Eigen::MatrixXd(0, 0));
        if (!lambda)
            lambda = default_lambda(theta, observed, empty);
        auto est = estimate_all_inputs(theta, observed, empty, *lambda, options.input_tol, options.input_max_iter,
                                       options.memory_horizon, &out.inputs);
        out.inputs = est.inputs;
        stats = sufficient_stats(observed_only(observed, alpha_obs, out.inputs, options.memory_horizon));
        ms = m_step(stats);
        out.A = ms.theta.A11;
        out.B1 = ms.theta.B1;
        out.Sigma1 = ms.theta.Sigma1;
        out.iterations = it + 1;
        const double current = out.Sigma1.trace();
        if (std::abs(current - previous) <= options.rel_tol * std::abs(current))
            break;
        previous = current;
    }
    return out;
}

} // namespace fracnet
