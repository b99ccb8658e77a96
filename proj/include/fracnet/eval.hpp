#ifndef FRACNET_EVAL_HPP
#define FRACNET_EVAL_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracnet/em.hpp"
#include "fracnet/model.hpp"

namespace fracnet {

struct PredictionPath {
    Eigen::MatrixXd observed;  // n x h: x_{t+1} .. x_{t+h}
    Eigen::MatrixXd latent;    // m x h: z_t .. z_{t+h-1}
};

/// Noiseless forward recursion from the end of the history.
///
/// `observed` holds x_0 .. x_t and `latent` holds (filtered) ẑ_0 .. ẑ_{t-1}; the missing latents are
/// produced by the same recursion. Inputs u_k come from `inputs` for k < t and are zero afterwards.
PredictionPath predict_k_steps(const Params& params, const Eigen::MatrixXd& observed, const Eigen::MatrixXd& latent,
                               const Inputs& inputs, Index horizon,
                               std::optional<Index> memory_horizon = std::nullopt);

struct RelativeError {
    Eigen::VectorXd values;       // NaN where undefined
    std::vector<bool> undefined;  // truth channel has zero energy
};

/// e_i = sqrt( sum_k (x_i[k] - x̂_i[k])^2 / sum_k x_i[k]^2 ), channelwise over columns.
RelativeError relative_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& predicted);

struct PredictionReport {
    Index horizon = 0;
    Index first_target = 0;       // column of the first predicted sample
    Eigen::VectorXd per_node_error;
    std::vector<bool> undefined;
    double mean_error = 0.0;      // over the channels in `designated` (all when empty)
    Eigen::MatrixXd predictions;  // n x targets
    Eigen::MatrixXd truth;
};

/// Rolling-origin h-step forecast: every column k >= first_target is predicted from the origin k - h.
/// `latent` carries ẑ_0 .. ẑ_{T-2} (empty rows when m = 0).
PredictionReport rolling_forecast(const Params& params, const Eigen::MatrixXd& observed, const Eigen::MatrixXd& latent,
                                  const Inputs& inputs, Index horizon, Index first_target,
                                  const std::vector<Index>& designated = {},
                                  std::optional<Index> memory_horizon = std::nullopt);

/// Filters the full record under `params` (inputs zero past the fitted range), then runs the rolling forecast.
PredictionReport evaluate_model(const Params& params, const Eigen::MatrixXd& observed, const Inputs& fitted_inputs,
                                Index horizon, Index first_target, const std::vector<Index>& designated = {},
                                std::optional<Index> memory_horizon = std::nullopt);

struct OrderEstimate {
    Eigen::VectorXd alphas;
    Eigen::VectorXd hurst;        // DFA fluctuation exponent
    std::vector<bool> degenerate; // constant channel, order forced to 0
};

/// Detrended fluctuation analysis (linear detrending), alpha = clamp(H - 1/2, 0, 2).
/// A heuristic initializer for the fractional orders, not an estimator with guarantees.
OrderEstimate estimate_fractional_orders(const Eigen::MatrixXd& series);

using DataProvider = std::function<Series(std::uint64_t seed)>;

struct ComparisonOptions {
    Index horizon = 5;
    double train_fraction = 0.8;  // fit on this prefix, evaluate on the remainder
    int n_seeds = 1;
    std::uint64_t base_seed = 0;  // seed i = base_seed + i
    int threads = 1;
    Index p = 0;
    EMConfig em;
    BaselineOptions baseline;
};

struct SeedComparison {
    std::uint64_t seed = 0;
    Eigen::VectorXd without_latent;  // per observed node
    Eigen::VectorXd with_latent;
    double mean_without = 0.0;
    double mean_with = 0.0;
    int em_iterations = 0;
    bool em_converged = false;
    std::vector<double> q_trace;
};

struct ComparisonRow {
    std::vector<Index> observed, hidden;
    std::vector<SeedComparison> seeds;

    double win_rate() const;  // fraction of seeds with mean_with <= mean_without
    Eigen::VectorXd median_without() const;
    Eigen::VectorXd median_with() const;
    double converged_fraction() const;
};

/// Fits with-latent (EM) and without-latent (baseline) models on the training prefix of each seed's data
/// and scores both with rolling h-step relative errors on the held-out tail.
ComparisonRow run_latent_comparison(const DataProvider& data, const std::vector<Index>& observed_ids,
                                    const std::vector<Index>& hidden_ids, const Eigen::VectorXd& alpha_obs,
                                    const Eigen::VectorXd& alpha_lat, const ComparisonOptions& options);

struct SweepSpec {
    std::vector<Index> fixed_observed;
    std::vector<Index> reveal_order;
    std::vector<Index> hidden_pool;

    void validate(Index channels) const;
    Index positions() const { return Index(reveal_order.size()) + 1; }
    std::vector<Index> observed_at(Index position) const;
    std::vector<Index> hidden_at(Index position) const;
};

struct SweepPosition {
    std::vector<Index> observed, hidden;
    std::vector<double> without_latent;  // per seed, averaged over the fixed channels
    std::vector<double> with_latent;
    std::vector<bool> em_converged;

    double mean_without() const;
    double mean_with() const;
    int wins() const;  // seeds with with_latent <= without_latent
};

struct SweepTable {
    SweepSpec spec;
    std::vector<SweepPosition> positions;
};

/// Reveal sweep: at position i the first i channels of reveal_order join the fixed observed set and the rest
/// of the pool stays hidden; errors are averaged over the fixed channels only.
SweepTable run_reveal_sweep(const DataProvider& data, const SweepSpec& spec, const Eigen::VectorXd& alphas,
                            const ComparisonOptions& options);

} // namespace fracnet

#endif // FRACNET_EVAL_HPP
