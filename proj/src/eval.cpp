#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fracnet/eval.hpp"
#include "fracnet/kalman.hpp"
#include "fracnet/parallel.hpp"

namespace fracnet {

PredictionPath predict_k_steps(const Params& params, const Eigen::MatrixXd& observed, const Eigen::MatrixXd& latent,
                               const Inputs& inputs, Index horizon, std::optional<Index> memory_horizon) {
    const Index n = params.n(), m = params.m();
    if (horizon < 1)
        throw ConfigError("predict_k_steps: horizon must be >= 1");
    if (observed.rows() != n || observed.cols() < 1)
        throw DimensionError("predict_k_steps: observed history has the wrong channel count or is empty");
    const Index t = observed.cols() - 1;
    if (latent.rows() != m || (m > 0 && latent.cols() != t))
        throw DimensionError("predict_k_steps: latent history must be m x t (ẑ_0 .. ẑ_{t-1})");
    if (inputs.dims() != params.p())
        throw DimensionError("predict_k_steps: input dimension differs from the model");

    const Index J = memory_horizon_for(t + 1 + horizon, memory_horizon);
    const GLKernel<double> obs_kernel(params.alpha_obs, J);
    const GLKernel<double> lat_kernel(params.alpha_lat, J);

    Eigen::MatrixXd X(n, t + 1 + horizon);
    X.leftCols(t + 1) = observed;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(m, t + horizon);
    if (m > 0)
        Z.leftCols(t) = latent;
    auto u = [&](Index k) -> Eigen::VectorXd {
        return k < t ? inputs.at(k) : Eigen::VectorXd::Zero(params.p());
    };

    for (Index s = t; s < t + horizon; ++s) {
        if (m > 0 && s >= 1) {
            Eigen::VectorXd z = params.A21 * X.col(s - 1) + params.A22 * Z.col(s - 1) + params.B2 * u(s - 1);
            for (Index j = 1; j <= std::min(s, J); ++j)
                z -= lat_kernel.psi(j).cwiseProduct(Z.col(s - j));
            Z.col(s) = z;
        }
        Eigen::VectorXd x = params.A11 * X.col(s) + params.A12 * Z.col(s) + params.B1 * u(s);
        for (Index j = 1; j <= std::min(s + 1, J); ++j)
            x -= obs_kernel.psi(j).cwiseProduct(X.col(s + 1 - j));
        X.col(s + 1) = x;
    }
    return {X.rightCols(horizon), Z.rightCols(horizon)};
}

RelativeError relative_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted) {
    if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols())
        throw DimensionError("relative_error: truth and prediction shapes differ");
    RelativeError out;
    out.values.resize(truth.rows());
    out.undefined.assign(std::size_t(truth.rows()), false);
    for (Index i = 0; i < truth.rows(); ++i) {
        const double energy = truth.row(i).squaredNorm();
        if (!(energy > 0.0)) {
            out.values(i) = std::numeric_limits<double>::quiet_NaN();
            out.undefined[std::size_t(i)] = true;
            continue;
        }
        out.values(i) = std::sqrt((truth.row(i) - predicted.row(i)).squaredNorm() / energy);
    }
    return out;
}

PredictionReport rolling_forecast(const Params& params, const Eigen::MatrixXd& observed, const Eigen::MatrixXd& latent,
                                  const Inputs& inputs, Index horizon, Index first_target,
                                  const std::vector<Index>& designated, std::optional<Index> memory_horizon) {
    const Index T = observed.cols();
    if (horizon < 1)
        throw ConfigError("rolling_forecast: horizon must be >= 1");
    if (first_target < horizon || first_target >= T)
        throw ConfigError("rolling_forecast: first target must lie in [horizon, T)");
    const Index targets = T - first_target;
    PredictionReport rep;
    rep.horizon = horizon;
    rep.first_target = first_target;
    rep.truth = observed.rightCols(targets);
    rep.predictions.resize(observed.rows(), targets);
    for (Index k = first_target; k < T; ++k) {
        const Index origin = k - horizon;
        const Eigen::MatrixXd z = params.m() > 0 ? Eigen::MatrixXd(latent.leftCols(origin))
                                                 : Eigen::MatrixXd(0, origin);
        const auto path = predict_k_steps(params, observed.leftCols(origin + 1), z, inputs, horizon, memory_horizon);
        rep.predictions.col(k - first_target) = path.observed.col(horizon - 1);
    }
    const auto err = relative_error(rep.truth, rep.predictions);
    rep.per_node_error = err.values;
    rep.undefined = err.undefined;
    std::vector<Index> chans = designated;
    if (chans.empty())
        for (Index i = 0; i < observed.rows(); ++i)
            chans.push_back(i);
    double sum = 0.0;
    int used = 0;
    for (Index c : chans) {
        if (c < 0 || c >= observed.rows())
            throw DimensionError("rolling_forecast: designated channel out of range");
        if (!err.undefined[std::size_t(c)]) {
            sum += err.values(c);
            ++used;
        }
    }
    rep.mean_error = used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
    return rep;
}

PredictionReport evaluate_model(const Params& params, const Eigen::MatrixXd& observed, const Inputs& fitted_inputs,
                                Index horizon, Index first_target, const std::vector<Index>& designated,
                                std::optional<Index> memory_horizon) {
    const Index T = observed.cols();
    Inputs inputs = Inputs::zeros(params.p(), std::max<Index>(T - 2, 0));
    const Index keep = std::min(fitted_inputs.steps(), inputs.steps());
    if (fitted_inputs.dims() == params.p() && keep > 0)
        inputs.values.leftCols(keep) = fitted_inputs.values.leftCols(keep);
    Eigen::MatrixXd latent(params.m(), std::max<Index>(T - 1, 0));
    if (params.m() > 0) {
        const auto filter = run_filter(params, observed, inputs, Eigen::VectorXd(Eigen::VectorXd::Zero(params.m())),
                                       Eigen::MatrixXd(Eigen::MatrixXd::Identity(params.m(), params.m())),
                                       memory_horizon);
        latent = filter.means_with_prior();
    }
    return rolling_forecast(params, observed, latent, inputs, horizon, first_target, designated, memory_horizon);
}

namespace {

double median(std::vector<double> v) {
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

void require_disjoint_ids(const std::vector<Index>& a, const std::vector<Index>& b, Index channels) {
    std::set<Index> seen;
    for (const auto* ids : {&a, &b})
        for (Index id : *ids) {
            if (id < 0 || id >= channels)
                throw DataError("channel id " + std::to_string(id) + " does not exist (" + std::to_string(channels)
                                + " channels)");
            if (!seen.insert(id).second)
                throw ConfigError("channel id " + std::to_string(id) + " listed more than once");
        }
}

struct PairScore {
    PredictionReport without, with;
    FitReport em;
};

PairScore score_pair(const Series& data, const std::vector<Index>& observed, const std::vector<Index>& hidden,
                     const Eigen::VectorXd& alpha_obs, const Eigen::VectorXd& alpha_lat,
                     const ComparisonOptions& options, std::uint64_t seed, const std::vector<Index>& designated) {
    require_disjoint_ids(observed, hidden, data.channels());
    const Eigen::MatrixXd x = data.select(observed).values;
    const Index T = x.cols();
    const Index train = Index(std::floor(options.train_fraction * double(T)));
    if (train < 3 || train >= T)
        throw ConfigError("train_fraction leaves no training or no test samples");

    EMConfig em = options.em;
    em.seed = seed;
    BaselineOptions base = options.baseline;
    base.p = options.p;
    base.seed = seed;
    base.memory_horizon = em.memory_horizon;

    PairScore out;
    out.em = fit(x.leftCols(train), alpha_obs, alpha_lat, Index(hidden.size()), options.p, em);
    out.with = evaluate_model(out.em.theta_final, x, out.em.inputs_final, options.horizon, train, designated,
                              em.memory_horizon);
    const auto baseline = baseline_fit_no_latent(x.leftCols(train), alpha_obs, base);
    out.without = evaluate_model(baseline.to_params(alpha_obs), x, baseline.inputs, options.horizon, train,
                                 designated, em.memory_horizon);
    return out;
}

} // namespace

double ComparisonRow::win_rate() const {
    if (seeds.empty())
        return 0.0;
    const auto wins = std::count_if(seeds.begin(), seeds.end(),
                                    [](const SeedComparison& s) { return s.mean_with <= s.mean_without; });
    return double(wins) / double(seeds.size());
}

Eigen::VectorXd ComparisonRow::median_without() const {
    Eigen::VectorXd out(Index(observed.size()));
    for (Index i = 0; i < out.size(); ++i) {
        std::vector<double> v;
        for (const auto& s : seeds)
            v.push_back(s.without_latent(i));
        out(i) = median(v);
    }
    return out;
}

Eigen::VectorXd ComparisonRow::median_with() const {
    Eigen::VectorXd out(Index(observed.size()));
    for (Index i = 0; i < out.size(); ++i) {
        std::vector<double> v;
        for (const auto& s : seeds)
            v.push_back(s.with_latent(i));
        out(i) = median(v);
    }
    return out;
}

double ComparisonRow::converged_fraction() const {
    if (seeds.empty())
        return 0.0;
    const auto c = std::count_if(seeds.begin(), seeds.end(), [](const SeedComparison& s) { return s.em_converged; });
    return double(c) / double(seeds.size());
}

ComparisonRow run_latent_comparison(const DataProvider& data, const std::vector<Index>& observed_ids,
                                    const std::vector<Index>& hidden_ids, const Eigen::VectorXd& alpha_obs,
                                    const Eigen::VectorXd& alpha_lat, const ComparisonOptions& options) {
    if (options.n_seeds < 1)
        throw ConfigError("run_latent_comparison: n_seeds must be >= 1");
    if (alpha_obs.size() != Index(observed_ids.size()) || alpha_lat.size() != Index(hidden_ids.size()))
        throw DimensionError("run_latent_comparison: order vectors must match the id lists");
    ComparisonRow row;
    row.observed = observed_ids;
    row.hidden = hidden_ids;
    row.seeds.resize(std::size_t(options.n_seeds));
    parallel_for(row.seeds.size(), options.threads, [&](std::size_t i) {
        const std::uint64_t seed = options.base_seed + i;
        try {
            const Series series = data(seed);
            const auto score = score_pair(series, observed_ids, hidden_ids, alpha_obs, alpha_lat, options, seed, {});
            auto& s = row.seeds[i];
            s.seed = seed;
            s.without_latent = score.without.per_node_error;
            s.with_latent = score.with.per_node_error;
            s.mean_without = score.without.mean_error;
            s.mean_with = score.with.mean_error;
            s.em_iterations = score.em.iterations;
            s.em_converged = score.em.converged;
            s.q_trace = score.em.q_trace;
        } catch (const NumericalError& e) {
            throw NumericalError("seed " + std::to_string(seed) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("seed " + std::to_string(seed) + ": " + e.what());
        }
    });
    return row;
}

void SweepSpec::validate(Index channels) const {
    std::set<Index> fixed(fixed_observed.begin(), fixed_observed.end());
    std::set<Index> pool(hidden_pool.begin(), hidden_pool.end());
    if (fixed.size() != fixed_observed.size() || pool.size() != hidden_pool.size())
        throw ConfigError("SweepSpec: duplicate channel ids");
    if (fixed_observed.empty())
        throw ConfigError("SweepSpec: fixed observed set is empty");
    for (Index id : fixed_observed) {
        if (pool.count(id))
            throw ConfigError("SweepSpec: channel " + std::to_string(id) + " is both fixed and hidden");
    }
    for (const auto* ids : {&fixed_observed, &hidden_pool})
        for (Index id : *ids)
            if (id < 0 || id >= channels)
                throw DataError("SweepSpec: channel id " + std::to_string(id) + " does not exist");
    std::set<Index> revealed;
    for (Index id : reveal_order) {
        if (!pool.count(id))
            throw ConfigError("SweepSpec: revealed channel " + std::to_string(id) + " is not in the hidden pool");
        if (!revealed.insert(id).second)
            throw ConfigError("SweepSpec: channel " + std::to_string(id) + " revealed twice");
    }
}

std::vector<Index> SweepSpec::observed_at(Index position) const {
    std::vector<Index> out = fixed_observed;
    out.insert(out.end(), reveal_order.begin(), reveal_order.begin() + position);
    return out;
}

std::vector<Index> SweepSpec::hidden_at(Index position) const {
    std::set<Index> revealed(reveal_order.begin(), reveal_order.begin() + position);
    std::vector<Index> out;
    for (Index id : hidden_pool)
        if (!revealed.count(id))
            out.push_back(id);
    return out;
}

double SweepPosition::mean_without() const {
    double s = 0.0;
    for (double v : without_latent)
        s += v;
    return without_latent.empty() ? 0.0 : s / double(without_latent.size());
}

double SweepPosition::mean_with() const {
    double s = 0.0;
    for (double v : with_latent)
        s += v;
    return with_latent.empty() ? 0.0 : s / double(with_latent.size());
}

int SweepPosition::wins() const {
    int w = 0;
    for (std::size_t i = 0; i < with_latent.size(); ++i)
        w += with_latent[i] <= without_latent[i];
    return w;
}

SweepTable run_reveal_sweep(const DataProvider& data, const SweepSpec& spec, const Eigen::VectorXd& alphas,
                            const ComparisonOptions& options) {
    if (options.n_seeds < 1)
        throw ConfigError("run_reveal_sweep: n_seeds must be >= 1");
    spec.validate(alphas.size());
    SweepTable table;
    table.spec = spec;
    const Index P = spec.positions();
    const std::size_t S = std::size_t(options.n_seeds);
    table.positions.resize(std::size_t(P));
    for (Index j = 0; j < P; ++j) {
        auto& pos = table.positions[std::size_t(j)];
        pos.observed = spec.observed_at(j);
        pos.hidden = spec.hidden_at(j);
        pos.without_latent.assign(S, 0.0);
        pos.with_latent.assign(S, 0.0);
        pos.em_converged.assign(S, false);
    }

    std::vector<Series> datasets(S);
    for (std::size_t i = 0; i < S; ++i) {
        datasets[i] = data(options.base_seed + i);
        if (datasets[i].channels() != alphas.size())
            throw DataError("run_reveal_sweep: dataset channel count differs from the order vector");
    }

    std::vector<Index> designated(spec.fixed_observed.size());
    for (std::size_t i = 0; i < designated.size(); ++i)
        designated[i] = Index(i);

    std::vector<bool> converged(S * std::size_t(P));
    parallel_for(S * std::size_t(P), options.threads, [&](std::size_t task) {
        const std::size_t i = task / std::size_t(P);
        const Index j = Index(task % std::size_t(P));
        auto& pos = table.positions[std::size_t(j)];
        Eigen::VectorXd a_obs(Index(pos.observed.size())), a_lat(Index(pos.hidden.size()));
        for (std::size_t c = 0; c < pos.observed.size(); ++c)
            a_obs(Index(c)) = alphas(pos.observed[c]);
        for (std::size_t c = 0; c < pos.hidden.size(); ++c)
            a_lat(Index(c)) = alphas(pos.hidden[c]);
        const std::uint64_t seed = options.base_seed + i;
        try {
            const auto score =
                score_pair(datasets[i], pos.observed, pos.hidden, a_obs, a_lat, options, seed, designated);
            pos.without_latent[i] = score.without.mean_error;
            pos.with_latent[i] = score.with.mean_error;
            converged[task] = score.em.converged;
        } catch (const NumericalError& e) {
            throw NumericalError("sweep position " + std::to_string(j) + ", seed " + std::to_string(seed) + ": "
                                 + e.what());
        }
    });
    for (std::size_t task = 0; task < converged.size(); ++task)
        table.positions[task % std::size_t(P)].em_converged[task / std::size_t(P)] = converged[task];
    return table;
}

} // namespace fracnet
