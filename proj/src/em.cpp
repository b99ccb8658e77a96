#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "fracnet/em.hpp"

namespace fracnet {

Params initial_params(Index n, Index m, Index p, const Eigen::VectorXd& alpha_obs, const Eigen::VectorXd& alpha_lat,
                      double range, std::uint64_t seed) {
    if (!(range > 0.0))
        throw ConfigError("init_range must be > 0");
    Params t = Params::zeros(n, m, p);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-range, range);
    for (Eigen::MatrixXd* block : {&t.A11, &t.A12, &t.A21, &t.A22, &t.B1, &t.B2})
        for (Index i = 0; i < block->size(); ++i)
            block->data()[i] = unif(rng);
    t.alpha_obs = alpha_obs;
    t.alpha_lat = alpha_lat;
    return t;
}

namespace {

template <typename F>
auto annotated(int iteration, F&& step) -> decltype(step()) {
    const std::string where = "EM iteration " + std::to_string(iteration) + ": ";
    try {
        return step();
    } catch (const SingularSystemError& e) {
        throw SingularSystemError(where + e.what());
    } catch (const NotPsdError& e) {
        throw NotPsdError(where + e.what());
    } catch (const UnidentifiableInputError& e) {
        throw UnidentifiableInputError(where + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(where + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError(where + e.what());
    }
}

} // namespace

namespace detail {

Eigen::VectorXd pack_state(const Params& t, const Inputs& u) {
    const Eigen::MatrixXd* blocks[] = {&t.A11, &t.A12, &t.A21, &t.A22, &t.B1, &t.B2, &t.Sigma1, &t.Sigma2, &u.values};
    Index size = 0;
    for (const auto* b : blocks)
        size += b->size();
    Eigen::VectorXd out(size);
    Index at = 0;
    for (const auto* b : blocks) {
        out.segment(at, b->size()) = b->reshaped();
        at += b->size();
    }
    return out;
}

void unpack_state(const Eigen::VectorXd& v, Params& t, Inputs& u) {
    Eigen::MatrixXd* blocks[] = {&t.A11, &t.A12, &t.A21, &t.A22, &t.B1, &t.B2, &t.Sigma1, &t.Sigma2, &u.values};
    Index at = 0;
    for (auto* b : blocks) {
        b->reshaped() = v.segment(at, b->size());
        at += b->size();
    }
    t.Sigma1 = symmetrized(t.Sigma1);
    t.Sigma2 = symmetrized(t.Sigma2);
}

bool admissible(const Params& t) {
    const auto pd = [](const Eigen::MatrixXd& s) {
        return s.size() == 0 || (s.allFinite() && Eigen::LLT<Eigen::MatrixXd>(s).info() == Eigen::Success);
    };
    return t.A11.allFinite() && t.A12.allFinite() && t.A21.allFinite() && t.A22.allFinite() && t.B1.allFinite()
           && t.B2.allFinite() && pd(t.Sigma1) && pd(t.Sigma2);
}

} // namespace detail

FitReport fit(const Eigen::MatrixXd& observed, const Eigen::VectorXd& alpha_obs, const Eigen::VectorXd& alpha_lat,
              Index m, Index p, const EMConfig& config) {
    const Index n = observed.rows();
    const Index N = observed.cols() - 1;
    if (m < 0 || p < 0)
        throw ConfigError("fit: m and p must be >= 0");
    if (config.max_iter < 1 || !(config.rel_tol > 0.0) || !(config.init_range > 0.0) || config.patience < 1)
        throw ConfigError("fit: max_iter >= 1, rel_tol > 0, init_range > 0 and patience >= 1 required");
    if (alpha_obs.size() != n || alpha_lat.size() != m)
        throw DimensionError("fit: fractional orders must match the observed/latent dimensions");
    if (!observed.allFinite())
        throw DataError("fit: non-finite observation");
    if (N < std::max<Index>(n + m + p + 2, 3))
        throw DimensionError("fit: record too short, need N >= max(n+m+p+2, 3) (N = " + std::to_string(N) + ")");

    FitReport report;
    report.config = config;
    Params theta = config.initial ? *config.initial
                                  : initial_params(n, m, p, alpha_obs, alpha_lat, config.init_range, config.seed);
    if (config.initial) {
        theta.validate();
        if (theta.n() != n || theta.m() != m || theta.p() != p)
            throw DimensionError("fit: initial parameters do not match (n, m, p)");
        theta.alpha_obs = alpha_obs;
        theta.alpha_lat = alpha_lat;
    }
    Inputs inputs = Inputs::zeros(p, N - 1);
    const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(m);
    const Eigen::MatrixXd P0 = Eigen::MatrixXd::Identity(m, m);
    std::optional<double> lambda = config.lambda;

    if (m == 0 && p == 0) {
        // Nothing hidden: one M-step is the exact maximum-likelihood fit.
        const auto filter = run_filter(theta, observed, inputs, z0, P0, config.memory_horizon);
        const auto stats =
            sufficient_stats(EStep<double>::from_filter(observed, filter, inputs, alpha_obs, alpha_lat,
                                                        config.memory_horizon));
        const auto ms = m_step(stats, config.mstep);
        report.theta_final = ms.theta;
        report.regularized = ms.regularized;
        report.q_trace.push_back(q_value(ms.theta, stats));
        report.theta_trace.push_back(ms.theta);
        report.iterations = 1;
        report.converged = true;
        report.z_hat_final.resize(0, N - 1);
        report.inputs_final = inputs;
        return report;
    }

    // One E-step + M-step from (theta, inputs); returns the Q value of the update.
    auto em_map = [&](Params& th, Inputs& u, int it) {
        return annotated(it, [&] {
            const auto filter = run_filter(th, observed, u, z0, P0, config.memory_horizon);
            if (p > 0) {
                if (!lambda)
                    lambda = default_lambda(th, observed, filter);
                auto est = estimate_all_inputs(th, observed, filter, *lambda, config.input_tol, config.input_max_iter,
                                               config.memory_horizon, &u);
                u = std::move(est.inputs);
                report.input_nonconverged = est.nonconverged;
            }
            const auto stats = sufficient_stats(
                EStep<double>::from_filter(observed, filter, u, alpha_obs, alpha_lat, config.memory_horizon));
            const auto ms = m_step(stats, config.mstep);
            report.regularized = report.regularized || ms.regularized;
            th = ms.theta;
            const double value = q_value(th, stats);
            if (config.normalize_latent_scale && m > 0)
                th = rescale_latent(th, unit_noise_scale(th));
            if (!std::isfinite(value))
                throw NumericalError("Q value is not finite");
            report.theta_trace.push_back(th);
            return value;
        });
    };

    int it = 0;
    auto record = [&](double q) {
        report.q_trace.push_back(q);
        report.iterations = ++it;
        const auto& tr = report.q_trace;
        const std::size_t need = std::size_t(config.patience) + 1;
        if (tr.size() < need)
            return false;
        for (std::size_t i = tr.size() - need + 1; i < tr.size(); ++i)
            if (!(std::abs(tr[i] - tr[i - 1]) < config.rel_tol * std::abs(tr[i])))
                return false;
        report.converged = true;
        return true;
    };

    double step_max = 1.0;
    while (it < config.max_iter) {
        if (config.acceleration == Acceleration::none || config.max_iter - it < 3) {
            if (record(em_map(theta, inputs, it + 1)))
                break;
            continue;
        }
        // SQUAREM cycle: two plain updates, an extrapolation along them, then a stabilizing update.
        Params th1 = theta, th2;
        Inputs u1 = inputs, u2;
        if (record(em_map(th1, u1, it + 1))) {
            theta = th1;
            inputs = u1;
            break;
        }
        th2 = th1;
        u2 = u1;
        if (record(em_map(th2, u2, it + 1))) {
            theta = th2;
            inputs = u2;
            break;
        }
        const Eigen::VectorXd v0 = detail::pack_state(theta, inputs);
        const Eigen::VectorXd r = detail::pack_state(th1, u1) - v0;
        const Eigen::VectorXd v = detail::pack_state(th2, u2) - 2.0 * detail::pack_state(th1, u1) + v0;
        double alpha = v.norm() > 0.0 ? -r.norm() / v.norm() : -1.0;
        alpha = std::clamp(alpha, -step_max, -1.0);
        if (alpha == -step_max)
            step_max *= 4.0;
        Params th3 = theta;
        Inputs u3 = inputs;
        bool extrapolated = false;
        if (alpha < -1.0) {
            detail::unpack_state(Eigen::VectorXd(v0 - 2.0 * alpha * r + alpha * alpha * v), th3, u3);
            extrapolated = detail::admissible(th3);
        }
        if (!extrapolated) {
            th3 = th2;
            u3 = u2;
        }
        double q = 0.0;
        try {
            q = em_map(th3, u3, it + 1);
        } catch (const NumericalError&) {
            if (!extrapolated)
                throw;
            // Extrapolated point left the admissible region; restart from the plain update.
            th3 = th2;
            u3 = u2;
            q = em_map(th3, u3, it + 1);
            step_max = 1.0;
        }
        theta = th3;
        inputs = u3;
        if (record(q))
            break;
    }

    report.theta_final = theta;
    report.inputs_final = inputs;
    report.lambda = lambda.value_or(0.0);
    report.z_hat_final = annotated(report.iterations + 1, [&] {
        return run_filter(theta, observed, inputs, z0, P0, config.memory_horizon).z_hat;
    });
    return report;
}

} // namespace fracnet
