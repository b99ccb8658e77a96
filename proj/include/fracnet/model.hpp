#ifndef FRACNET_MODEL_HPP
#define FRACNET_MODEL_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracnet/error.hpp"
#include "fracnet/fracops.hpp"
#include "fracnet/linalg.hpp"

namespace fracnet {

/// Parameters of the coupled observed/latent fractional network
///
///   Delta^alpha [x; z][k+1] = [A11 A12; A21 A22] [x; z][k] + [B1; B2] u[k] + [e1; e2][k],
///
/// with e1 ~ N(0, Sigma1), e2 ~ N(0, Sigma2). n observed, m latent, p input channels.
template <typename Scalar>
struct ModelParams {
    MatrixX<Scalar> A11, A12, A21, A22;
    MatrixX<Scalar> B1, B2;
    MatrixX<Scalar> Sigma1, Sigma2;
    VectorX<Scalar> alpha_obs, alpha_lat;

    Index n() const { return A11.rows(); }
    Index m() const { return A22.rows(); }
    Index p() const { return B1.cols(); }

    static ModelParams zeros(Index n, Index m, Index p) {
        ModelParams t;
        t.A11 = MatrixX<Scalar>::Zero(n, n);
        t.A12 = MatrixX<Scalar>::Zero(n, m);
        t.A21 = MatrixX<Scalar>::Zero(m, n);
        t.A22 = MatrixX<Scalar>::Zero(m, m);
        t.B1 = MatrixX<Scalar>::Zero(n, p);
        t.B2 = MatrixX<Scalar>::Zero(m, p);
        t.Sigma1 = MatrixX<Scalar>::Identity(n, n);
        t.Sigma2 = MatrixX<Scalar>::Identity(m, m);
        t.alpha_obs = VectorX<Scalar>::Zero(n);
        t.alpha_lat = VectorX<Scalar>::Zero(m);
        return t;
    }

    /// Checks mutual consistency of all shapes, finiteness and PSD covariances.
    void validate() const {
        const Index nn = n(), mm = m(), pp = p();
        auto shape = [](const MatrixX<Scalar>& a, Index r, Index c, const char* name) {
            if (a.rows() != r || a.cols() != c)
                throw DimensionError(std::string("ModelParams: ") + name + " is " + std::to_string(a.rows()) + "x"
                                     + std::to_string(a.cols()) + ", expected " + std::to_string(r) + "x"
                                     + std::to_string(c));
            if (!a.allFinite())
                throw DataError(std::string("ModelParams: ") + name + " has non-finite entries");
        };
        shape(A11, nn, nn, "A11");
        shape(A12, nn, mm, "A12");
        shape(A21, mm, nn, "A21");
        shape(A22, mm, mm, "A22");
        shape(B1, nn, pp, "B1");
        shape(B2, mm, pp, "B2");
        shape(Sigma1, nn, nn, "Sigma1");
        shape(Sigma2, mm, mm, "Sigma2");
        if (alpha_obs.size() != nn || alpha_lat.size() != mm)
            throw DimensionError("ModelParams: fractional order vectors do not match n/m");
        if (!alpha_obs.allFinite() || !alpha_lat.allFinite())
            throw DataError("ModelParams: non-finite fractional order");
        require_psd(Sigma1, "Sigma1");
        require_psd(Sigma2, "Sigma2");
    }

    MatrixX<Scalar> stacked_A() const {
        MatrixX<Scalar> a(n() + m(), n() + m());
        a << A11, A12, A21, A22;
        return a;
    }
    MatrixX<Scalar> stacked_B() const {
        MatrixX<Scalar> b(n() + m(), p());
        b << B1, B2;
        return b;
    }
    VectorX<Scalar> stacked_alphas() const {
        VectorX<Scalar> a(n() + m());
        a << alpha_obs, alpha_lat;
        return a;
    }
    MatrixX<Scalar> stacked_Sigma() const {
        MatrixX<Scalar> s = MatrixX<Scalar>::Zero(n() + m(), n() + m());
        s.topLeftCorner(n(), n()) = Sigma1;
        s.bottomRightCorner(m(), m()) = Sigma2;
        return s;
    }

    /// Splits a full (n+m)-node network into observed/latent blocks.
    static ModelParams from_network(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B, const MatrixX<Scalar>& Sigma,
                                    const VectorX<Scalar>& alphas, const std::vector<Index>& observed,
                                    const std::vector<Index>& latent) {
        const Index d = A.rows();
        if (A.cols() != d || B.rows() != d || Sigma.rows() != d || Sigma.cols() != d || alphas.size() != d)
            throw DimensionError("from_network: inconsistent network dimensions");
        auto pick = [](const MatrixX<Scalar>& M, const std::vector<Index>& r, const std::vector<Index>& c) {
            MatrixX<Scalar> out(Index(r.size()), Index(c.size()));
            for (std::size_t i = 0; i < r.size(); ++i)
                for (std::size_t j = 0; j < c.size(); ++j)
                    out(Index(i), Index(j)) = M(r[i], c[j]);
            return out;
        };
        std::vector<Index> cols(std::size_t(B.cols()));
        for (std::size_t j = 0; j < cols.size(); ++j)
            cols[j] = Index(j);
        for (Index id : observed)
            if (id < 0 || id >= d)
                throw DimensionError("from_network: channel id out of range");
        for (Index id : latent)
            if (id < 0 || id >= d)
                throw DimensionError("from_network: channel id out of range");
        ModelParams t;
        t.A11 = pick(A, observed, observed);
        t.A12 = pick(A, observed, latent);
        t.A21 = pick(A, latent, observed);
        t.A22 = pick(A, latent, latent);
        t.B1 = pick(B, observed, cols);
        t.B2 = pick(B, latent, cols);
        t.Sigma1 = pick(Sigma, observed, observed);
        t.Sigma2 = pick(Sigma, latent, latent);
        t.alpha_obs.resize(Index(observed.size()));
        t.alpha_lat.resize(Index(latent.size()));
        for (std::size_t i = 0; i < observed.size(); ++i)
            t.alpha_obs(Index(i)) = alphas(observed[i]);
        for (std::size_t i = 0; i < latent.size(); ++i)
            t.alpha_lat(Index(i)) = alphas(latent[i]);
        return t;
    }
};

/// Channels x time trajectory. Column k holds sample k; column 0 is the initial sample.
template <typename Scalar>
struct TimeSeries {
    MatrixX<Scalar> values;
    std::vector<std::string> channel_labels;
    std::optional<double> sample_rate;

    Index channels() const { return values.rows(); }
    Index length() const { return values.cols(); }

    void validate() const {
        if (values.cols() < 1 || values.rows() < 1)
            throw DataError("TimeSeries: needs at least one channel and one sample");
        if (!values.allFinite())
            throw DataError("TimeSeries: non-finite value");
        if (!channel_labels.empty() && Index(channel_labels.size()) != values.rows())
            throw DimensionError("TimeSeries: label count does not match channel count");
    }

    TimeSeries select(const std::vector<Index>& ids) const {
        TimeSeries out;
        out.values.resize(Index(ids.size()), values.cols());
        out.sample_rate = sample_rate;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || ids[i] >= values.rows())
                throw DataError("TimeSeries: channel id " + std::to_string(ids[i]) + " does not exist");
            out.values.row(Index(i)) = values.row(ids[i]);
            if (!channel_labels.empty())
                out.channel_labels.push_back(channel_labels[std::size_t(ids[i])]);
        }
        return out;
    }

    TimeSeries head(Index samples) const {
        TimeSeries out{values.leftCols(samples), channel_labels, sample_rate};
        return out;
    }
};

/// Unknown inputs u_1 .. u_{N-1} for a record of N+1 samples; u_0 is fixed at zero.
template <typename Scalar>
struct InputSequence {
    MatrixX<Scalar> values;

    Index dims() const { return values.rows(); }
    Index steps() const { return values.cols(); }

    /// u_k for 0 <= k; zero for k == 0 and beyond the stored range.
    VectorX<Scalar> at(Index k) const {
        if (k < 1 || k > values.cols())
            return VectorX<Scalar>::Zero(values.rows());
        return values.col(k - 1);
    }

    double sparsity() const {
        if (values.size() == 0)
            return 0.0;
        return double((values.array() != Scalar(0)).count()) / double(values.size());
    }

    static InputSequence zeros(Index p, Index steps) { return {MatrixX<Scalar>::Zero(p, steps)}; }
};

template <typename Scalar>
struct Simulation {
    TimeSeries<Scalar> observed;
    TimeSeries<Scalar> latent;
};

/// Forward simulation of the network for `samples` columns (column 0 = initial state).
///
/// Solves the GL expansion for the newest sample:
///   s[k+1] = A s[k] + B u[k] + e[k] - sum_{j=1}^{k+1} Psi_j s[k+1-j].
/// `inputs` holds u_1 .. u_{samples-2} (or no columns, meaning all zero). Without a seed the run is noiseless.
template <typename Scalar>
Simulation<Scalar> simulate(const ModelParams<Scalar>& params, const VectorX<Scalar>& x0, const VectorX<Scalar>& z0,
                            const InputSequence<Scalar>& inputs, Index samples,
                            std::optional<std::uint64_t> noise_seed = std::nullopt) {
    params.validate();
    const Index n = params.n(), m = params.m(), d = n + m;
    if (samples < 1)
        throw DimensionError("simulate: samples must be >= 1");
    if (x0.size() != n || z0.size() != m)
        throw DimensionError("simulate: initial state dimensions do not match the model");
    if (inputs.dims() != params.p() || (inputs.steps() != 0 && inputs.steps() != std::max<Index>(samples - 2, 0)))
        throw DimensionError("simulate: input sequence must be p x (samples-2)");

    const GLKernel<Scalar> kernel(params.stacked_alphas(), samples - 1);
    MatrixX<Scalar> transition = params.stacked_A();
    if (samples > 1)
        transition.diagonal() -= kernel.psi(1);
    const MatrixX<Scalar> B = params.stacked_B();
    const MatrixX<Scalar> noise_factor = psd_sqrt(params.stacked_Sigma());

    std::mt19937_64 rng(noise_seed.value_or(0));
    std::normal_distribution<double> normal(0.0, 1.0);

    MatrixX<Scalar> s(d, samples);
    s.col(0) << x0, z0;
    VectorX<Scalar> next(d), white(d);
    for (Index k = 0; k + 1 < samples; ++k) {
        next.noalias() = transition * s.col(k);
        if (params.p() > 0 && inputs.steps() > 0 && k >= 1)
            next.noalias() += B * inputs.values.col(k - 1);
        for (Index j = 2; j <= k + 1; ++j)
            next -= kernel.psi(j).cwiseProduct(s.col(k + 1 - j));
        if (noise_seed) {
            for (Index i = 0; i < d; ++i)
                white(i) = Scalar(normal(rng));
            next.noalias() += noise_factor * white;
        }
        s.col(k + 1) = next;
    }

    Simulation<Scalar> out;
    out.observed.values = s.topRows(n);
    out.latent.values = s.bottomRows(m);
    return out;
}

template <typename Scalar>
Simulation<Scalar> simulate(const ModelParams<Scalar>& params, Index samples,
                            std::optional<std::uint64_t> noise_seed = std::nullopt) {
    return simulate(params, VectorX<Scalar>(VectorX<Scalar>::Zero(params.n())),
                    VectorX<Scalar>(VectorX<Scalar>::Zero(params.m())), InputSequence<Scalar>::zeros(params.p(), 0),
                    samples, noise_seed);
}

using Params = ModelParams<double>;
using Series = TimeSeries<double>;
using Inputs = InputSequence<double>;

/// No-latent comparison model: fractional-difference least squares x̊_k ~ A x_{k-1} + B1 u_{k-1},
/// alternating with the L1 input step when p > 0.
struct BaselineOptions {
    Index p = 0;
    std::optional<double> lambda;  // default: 0.1 * lambda_max at the first timestep
    int max_iter = 50;             // alternations when p > 0
    double rel_tol = 1e-8;         // on the residual sum of squares
    double input_tol = 1e-9;
    int input_max_iter = 5000;
    double init_range = 1.0;       // uniform B1 initialization
    std::uint64_t seed = 0;
    std::optional<Index> memory_horizon;  // full history when unset
};

struct BaselineFit {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B1;
    Eigen::MatrixXd Sigma1;
    Inputs inputs;
    int iterations = 0;

    /// The fit as a network with no latent channels.
    Params to_params(const Eigen::VectorXd& alpha_obs) const;
};

BaselineFit baseline_fit_no_latent(const Eigen::MatrixXd& observed, const Eigen::VectorXd& alpha_obs,
                                   const BaselineOptions& options = {});

} // namespace fracnet

#endif // FRACNET_MODEL_HPP
