#ifndef FRACNET_CLI_HPP
#define FRACNET_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracnet/benchmarks.hpp"
#include "fracnet/em.hpp"
#include "fracnet/io.hpp"
#include "fracnet/model.hpp"

namespace fracnet {

inline constexpr int kRunConfigVersion = 1;

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,      // bad flags or configuration
    exit_data = 2,       // missing/malformed files, dimension mismatches
    exit_numerical = 3,  // singular systems, non-finite iterates
};

/// Where trajectories come from when no dataset file is given.
struct SimulationConfig {
    std::string benchmark;         // "three_node" or "reveal"; empty when `params` is set
    std::filesystem::path params;  // model JSON; channels are observed then latent
    Index samples = 201;
    bool noiseless = false;
    double noise_variance = 1e-2;  // three_node
    RevealBenchmarkOptions reveal;
    std::optional<Eigen::VectorXd> initial_state;
};

struct RowConfig {
    std::vector<Index> observed, hidden;
};

/// Parsed run configuration; channel ids index the columns of the dataset (or simulated channels).
struct RunConfig {
    std::filesystem::path dataset;
    std::optional<SimulationConfig> simulation;
    std::vector<Index> observed, hidden;
    std::optional<Eigen::VectorXd> alphas;  // one order per channel
    bool estimate_alphas = false;           // DFA on the record instead
    std::optional<Eigen::VectorXd> alpha_obs, alpha_lat;
    std::optional<Index> m;
    Index p = 0;
    EMConfig em;
    BaselineOptions baseline;
    Index horizon = 5;
    double train_fraction = 0.8;
    int seeds = 1;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: FRACNET_THREADS or 1
    std::vector<RowConfig> rows;
    std::optional<SweepSpec> sweep;
    std::filesystem::path model;
    std::filesystem::path output;
};

/// Strict parse: unknown keys and a missing or unsupported "version" are configuration errors.
/// Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Command-line entry point. Machine output goes to files under --out or to `out`; diagnostics to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace fracnet

#endif // FRACNET_CLI_HPP
