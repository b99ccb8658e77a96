#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <set>

#include "CLI11.hpp"
#include "fracnet/cli.hpp"
#include "fracnet/error.hpp"
#include "fracnet/eval.hpp"
#include "fracnet/parallel.hpp"

namespace fracnet {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object())
        throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_as(const Json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type (" + j.at(key).dump() + ")");
    }
}

template <typename T>
void read_opt(const Json& j, const std::string& key, const std::string& where, T& into) {
    if (j.contains(key))
        into = get_as<T>(j, key, where);
}

std::vector<Index> read_ids(const Json& j, const std::string& key, const std::string& where) {
    const auto ids = get_as<std::vector<long long>>(j, key, where);
    std::vector<Index> out;
    for (long long id : ids) {
        if (id < 0)
            throw ConfigError(where + "." + key + ": channel ids must be >= 0");
        out.push_back(Index(id));
    }
    return out;
}

Eigen::VectorXd read_vector(const Json& j, const std::string& key, const std::string& where) {
    const auto v = get_as<std::vector<double>>(j, key, where);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Index(v.size()));
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_em(const Json& j, EMConfig& em) {
    const std::string w = "em";
    reject_unknown(j,
                   {"max_iter", "rel_tol", "patience", "acceleration", "lambda", "init_range", "input_tol",
                    "input_max_iter", "memory_horizon", "normalize_latent_scale"},
                   w);
    read_opt(j, "max_iter", w, em.max_iter);
    read_opt(j, "rel_tol", w, em.rel_tol);
    read_opt(j, "patience", w, em.patience);
    read_opt(j, "init_range", w, em.init_range);
    read_opt(j, "input_tol", w, em.input_tol);
    read_opt(j, "input_max_iter", w, em.input_max_iter);
    read_opt(j, "normalize_latent_scale", w, em.normalize_latent_scale);
    if (j.contains("lambda"))
        em.lambda = get_as<double>(j, "lambda", w);
    if (j.contains("memory_horizon"))
        em.memory_horizon = get_as<Index>(j, "memory_horizon", w);
    if (j.contains("acceleration")) {
        const auto a = get_as<std::string>(j, "acceleration", w);
        if (a == "squarem")
            em.acceleration = Acceleration::squarem;
        else if (a == "none")
            em.acceleration = Acceleration::none;
        else
            throw ConfigError("em.acceleration must be \"squarem\" or \"none\"");
    }
}

void parse_baseline(const Json& j, BaselineOptions& b) {
    const std::string w = "baseline";
    reject_unknown(j, {"max_iter", "rel_tol", "lambda", "init_range", "input_tol", "input_max_iter"}, w);
    read_opt(j, "max_iter", w, b.max_iter);
    read_opt(j, "rel_tol", w, b.rel_tol);
    read_opt(j, "init_range", w, b.init_range);
    read_opt(j, "input_tol", w, b.input_tol);
    read_opt(j, "input_max_iter", w, b.input_max_iter);
    if (j.contains("lambda"))
        b.lambda = get_as<double>(j, "lambda", w);
}

SimulationConfig parse_simulation(const Json& j, const fs::path& base) {
    const std::string w = "simulation";
    reject_unknown(j,
                   {"benchmark", "params", "samples", "noiseless", "noise_variance", "initial_state", "coupled",
                    "structure_seed", "fixed_noise", "pool_noise", "coupling_low", "coupling_high",
                    "targets_per_pool_node", "weak_coupling"},
                   w);
    SimulationConfig s;
    read_opt(j, "benchmark", w, s.benchmark);
    if (j.contains("params"))
        s.params = resolve(base, get_as<std::string>(j, "params", w));
    if (s.benchmark.empty() == s.params.empty())
        throw ConfigError("simulation: give exactly one of \"benchmark\" or \"params\"");
    if (!s.benchmark.empty() && s.benchmark != "three_node" && s.benchmark != "reveal")
        throw ConfigError("simulation.benchmark must be \"three_node\" or \"reveal\"");
    read_opt(j, "samples", w, s.samples);
    read_opt(j, "noiseless", w, s.noiseless);
    read_opt(j, "noise_variance", w, s.noise_variance);
    read_opt(j, "coupled", w, s.reveal.coupled);
    read_opt(j, "structure_seed", w, s.reveal.structure_seed);
    read_opt(j, "fixed_noise", w, s.reveal.fixed_noise);
    read_opt(j, "pool_noise", w, s.reveal.pool_noise);
    read_opt(j, "coupling_low", w, s.reveal.coupling_low);
    read_opt(j, "coupling_high", w, s.reveal.coupling_high);
    read_opt(j, "targets_per_pool_node", w, s.reveal.targets_per_pool_node);
    read_opt(j, "weak_coupling", w, s.reveal.weak_coupling);
    if (j.contains("initial_state"))
        s.initial_state = read_vector(j, "initial_state", w);
    if (s.samples < 3)
        throw ConfigError("simulation.samples must be >= 3");
    if (!(s.noise_variance >= 0.0))
        throw ConfigError("simulation.noise_variance must be >= 0");
    return s;
}

} // namespace

RunConfig parse_run_config(const Json& j, const fs::path& base_dir) {
    reject_unknown(j,
                   {"version", "dataset", "simulation", "observed", "hidden", "alphas", "alpha_obs", "alpha_lat", "m",
                    "p", "em", "baseline", "horizon", "train_fraction", "seeds", "seed", "threads", "rows", "sweep",
                    "model", "output"},
                   "config");
    const std::string w = "config";
    if (!j.contains("version"))
        throw ConfigError("config: missing \"version\"");
    if (get_as<int>(j, "version", w) != kRunConfigVersion)
        throw ConfigError("config: unsupported version " + j.at("version").dump());

    RunConfig c;
    if (j.contains("dataset"))
        c.dataset = resolve(base_dir, get_as<std::string>(j, "dataset", w));
    if (j.contains("simulation"))
        c.simulation = parse_simulation(j.at("simulation"), base_dir);
    if (!c.dataset.empty() && c.simulation)
        throw ConfigError("config: give either \"dataset\" or \"simulation\", not both");
    if (j.contains("observed"))
        c.observed = read_ids(j, "observed", w);
    if (j.contains("hidden"))
        c.hidden = read_ids(j, "hidden", w);
    if (j.contains("alphas")) {
        if (j.at("alphas").is_string()) {
            if (j.at("alphas") != "estimate")
                throw ConfigError("config.alphas must be a vector or \"estimate\"");
            c.estimate_alphas = true;
        } else {
            c.alphas = read_vector(j, "alphas", w);
        }
    }
    if (j.contains("alpha_obs"))
        c.alpha_obs = read_vector(j, "alpha_obs", w);
    if (j.contains("alpha_lat"))
        c.alpha_lat = read_vector(j, "alpha_lat", w);
    if (j.contains("m"))
        c.m = get_as<Index>(j, "m", w);
    read_opt(j, "p", w, c.p);
    if (j.contains("em"))
        parse_em(j.at("em"), c.em);
    if (j.contains("baseline"))
        parse_baseline(j.at("baseline"), c.baseline);
    read_opt(j, "horizon", w, c.horizon);
    read_opt(j, "train_fraction", w, c.train_fraction);
    read_opt(j, "seeds", w, c.seeds);
    read_opt(j, "seed", w, c.seed);
    read_opt(j, "threads", w, c.threads);
    if (j.contains("rows")) {
        if (!j.at("rows").is_array())
            throw ConfigError("config.rows must be an array");
        for (const auto& r : j.at("rows")) {
            reject_unknown(r, {"observed", "hidden"}, "rows[]");
            c.rows.push_back({read_ids(r, "observed", "rows[]"), read_ids(r, "hidden", "rows[]")});
        }
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        reject_unknown(s, {"fixed_observed", "reveal_order", "hidden_pool"}, "sweep");
        SweepSpec spec;
        spec.fixed_observed = read_ids(s, "fixed_observed", "sweep");
        spec.reveal_order = read_ids(s, "reveal_order", "sweep");
        spec.hidden_pool = read_ids(s, "hidden_pool", "sweep");
        c.sweep = spec;
    }
    if (j.contains("model"))
        c.model = resolve(base_dir, get_as<std::string>(j, "model", w));
    if (j.contains("output"))
        c.output = resolve(base_dir, get_as<std::string>(j, "output", w));

    if (c.p < 0 || (c.m && *c.m < 0))
        throw ConfigError("config: m and p must be >= 0");
    if (c.horizon < 1)
        throw ConfigError("config.horizon must be >= 1");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
        throw ConfigError("config.train_fraction must lie in (0, 1)");
    if (c.seeds < 1)
        throw ConfigError("config.seeds must be >= 1");
    if (c.threads < 0)
        throw ConfigError("config.threads must be >= 0");
    if (c.m && !c.hidden.empty() && *c.m != Index(c.hidden.size()))
        throw ConfigError("config: m differs from the number of hidden channel ids");
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    if (!fs::exists(path))
        throw ConfigError("config file '" + path.string() + "' does not exist");
    Json j;
    try {
        j = Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_run_config(j, path.parent_path());
}

namespace {

/// Channel source shared by all subcommands.
struct DataSource {
    std::vector<std::string> labels;
    std::optional<Eigen::VectorXd> true_alphas;
    DataProvider provider;
    bool simulated = false;
};

std::vector<std::string> numbered(const std::string& prefix, Index count) {
    std::vector<std::string> out;
    for (Index i = 0; i < count; ++i)
        out.push_back(prefix + std::to_string(i));
    return out;
}

DataSource resolve_data(const RunConfig& cfg, const fs::path& dataset_override) {
    DataSource src;
    const fs::path dataset = dataset_override.empty() ? cfg.dataset : dataset_override;
    if (!dataset.empty()) {
        auto series = std::make_shared<const Series>(load_csv(dataset));
        src.labels = series->channel_labels;
        src.provider = [series](std::uint64_t) { return *series; };
        return src;
    }
    if (!cfg.simulation)
        throw ConfigError("config: no \"dataset\" or \"simulation\" given");
    const SimulationConfig& sim = *cfg.simulation;

    Params params;
    if (sim.benchmark == "three_node") {
        params = three_node_network(sim.noise_variance).as_observed();
        src.labels = numbered("node", params.n());
    } else if (sim.benchmark == "reveal") {
        params = reveal_benchmark_network(sim.reveal).as_observed();
        src.labels = numbered("node", params.n());
    } else {
        params = params_from_json(load_json(sim.params));
        src.labels = numbered("x", params.n());
        for (const auto& l : numbered("z", params.m()))
            src.labels.push_back(l);
    }
    const Index d = params.n() + params.m();
    Eigen::VectorXd s0 = Eigen::VectorXd::Zero(d);
    if (sim.initial_state) {
        if (sim.initial_state->size() != d)
            throw DimensionError("simulation.initial_state needs " + std::to_string(d) + " entries");
        s0 = *sim.initial_state;
    }
    src.true_alphas = params.stacked_alphas();
    src.simulated = true;
    src.provider = [params, s0, sim, labels = src.labels](std::uint64_t seed) {
        const auto run = simulate(params, Eigen::VectorXd(s0.head(params.n())), Eigen::VectorXd(s0.tail(params.m())),
                                  Inputs::zeros(params.p(), 0), sim.samples,
                                  sim.noiseless ? std::nullopt : std::optional<std::uint64_t>(seed));
        Series out;
        out.values.resize(params.n() + params.m(), sim.samples);
        out.values.topRows(params.n()) = run.observed.values;
        out.values.bottomRows(params.m()) = run.latent.values;
        out.channel_labels = labels;
        return out;
    };
    return src;
}

Eigen::VectorXd channel_alphas(const RunConfig& cfg, const DataSource& src, const Series& series) {
    if (cfg.alphas) {
        if (cfg.alphas->size() != series.channels())
            throw DimensionError("config.alphas has " + std::to_string(cfg.alphas->size()) + " entries for "
                                 + std::to_string(series.channels()) + " channels");
        return *cfg.alphas;
    }
    if (cfg.estimate_alphas)
        return estimate_fractional_orders(series.values).alphas;
    if (src.true_alphas)
        return *src.true_alphas;
    return {};
}

Eigen::VectorXd pick(const Eigen::VectorXd& alphas, const std::vector<Index>& ids) {
    Eigen::VectorXd out(Index(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= alphas.size())
            throw DataError("channel id " + std::to_string(ids[i]) + " does not exist");
        out(Index(i)) = alphas(ids[i]);
    }
    return out;
}

std::vector<Index> default_observed(const RunConfig& cfg, Index channels, const std::vector<Index>& hidden) {
    if (!cfg.observed.empty())
        return cfg.observed;
    std::vector<Index> out;
    for (Index i = 0; i < channels; ++i)
        if (std::find(hidden.begin(), hidden.end(), i) == hidden.end())
            out.push_back(i);
    return out;
}

/// Orders for an observed/hidden split, honoring explicit alpha_obs/alpha_lat.
std::pair<Eigen::VectorXd, Eigen::VectorXd> split_alphas(const RunConfig& cfg, const Eigen::VectorXd& alphas,
                                                         const std::vector<Index>& observed,
                                                         const std::vector<Index>& hidden, Index m) {
    Eigen::VectorXd a_obs, a_lat;
    if (cfg.alpha_obs)
        a_obs = *cfg.alpha_obs;
    else if (alphas.size() > 0)
        a_obs = pick(alphas, observed);
    else
        throw ConfigError("config: fractional orders are required for dataset input (\"alphas\" or \"alpha_obs\")");
    if (cfg.alpha_lat)
        a_lat = *cfg.alpha_lat;
    else if (Index(hidden.size()) == m && alphas.size() > 0)
        a_lat = pick(alphas, hidden);
    else if (m > 0)
        throw ConfigError("config: \"alpha_lat\" is required when latent channels are not dataset channels");
    if (a_obs.size() != Index(observed.size()))
        throw DimensionError("config.alpha_obs length differs from the observed channel count");
    if (a_lat.size() != m)
        throw DimensionError("config.alpha_lat length differs from m");
    return {a_obs, a_lat};
}

struct Options {
    fs::path config;
    std::optional<std::uint64_t> seed;
    fs::path out_dir;
    std::optional<int> threads;
    std::string format = "csv";
    bool plots = false;
    fs::path data;
    fs::path model;
};

/// Routes primary output to a file under the output directory or to stdout.
class Sink {
public:
    Sink(fs::path dir, std::ostream& out, std::ostream& err) : dir_(std::move(dir)), out_(out), err_(err) {}

    void primary(const std::string& name, const std::string& text) {
        if (dir_.empty())
            out_ << text;
        else
            write_text(dir_ / name, text);
    }
    void secondary(const std::string& name, const std::string& text) {
        if (!dir_.empty())
            write_text(dir_ / name, text);
    }
    void plot(const std::string& name, const std::string& svg) {
        if (dir_.empty()) {
            if (!warned_)
                err_ << "note: --plots needs an output directory (--out); skipping plots\n";
            warned_ = true;
            return;
        }
        write_text(dir_ / name, svg);
    }
    std::ostream& diag() { return err_; }

private:
    fs::path dir_;
    std::ostream& out_;
    std::ostream& err_;
    bool warned_ = false;
};

std::vector<double> iota_vector(std::size_t count, double start = 0.0) {
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i)
        v[i] = start + double(i);
    return v;
}

std::vector<double> row_vector(const Eigen::MatrixXd& m, Index r) {
    std::vector<double> v(std::size_t(m.cols()));
    for (Index k = 0; k < m.cols(); ++k)
        v[std::size_t(k)] = m(r, k);
    return v;
}

std::string series_to_json_text(const Series& s) {
    Json j = {{"labels", s.channel_labels}, {"values", matrix_to_json(s.values)}};
    if (s.sample_rate)
        j["sample_rate"] = *s.sample_rate;
    return j.dump(2) + "\n";
}

int run_simulate(const RunConfig& cfg, const Options& opt, Sink& sink) {
    if (!cfg.simulation)
        throw ConfigError("simulate: config needs a \"simulation\" section");
    const DataSource src = resolve_data(cfg, {});
    const Series s = src.provider(opt.seed.value_or(cfg.seed));
    if (opt.format == "json")
        sink.primary("trajectories.json", series_to_json_text(s));
    else
        sink.primary("trajectories.csv", to_csv(s));
    if (opt.plots) {
        std::vector<PlotLine> lines;
        for (Index i = 0; i < s.channels(); ++i)
            lines.push_back({s.channel_labels[std::size_t(i)], iota_vector(std::size_t(s.length())),
                             row_vector(s.values, i)});
        sink.plot("trajectories.svg", svg_line_plot(lines, "Simulated trajectories", "sample", "value"));
    }
    return exit_ok;
}

int run_fit(const RunConfig& cfg, const Options& opt, Sink& sink) {
    const std::uint64_t seed = opt.seed.value_or(cfg.seed);
    const DataSource src = resolve_data(cfg, opt.data);
    const Series series = src.provider(seed);
    const auto observed = default_observed(cfg, series.channels(), cfg.hidden);
    const Index m = cfg.m.value_or(Index(cfg.hidden.size()));
    const auto [a_obs, a_lat] = split_alphas(cfg, channel_alphas(cfg, src, series), observed, cfg.hidden, m);

    EMConfig em = cfg.em;
    em.seed = seed;
    const Series x = series.select(observed);
    const FitReport report = fit(x.values, a_obs, a_lat, m, cfg.p, em);

    sink.secondary("model.json", params_to_json(report.theta_final).dump(2) + "\n");
    if (opt.format == "json") {
        sink.primary("fit_report.json", fit_report_to_json(report).dump(2) + "\n");
    } else {
        sink.secondary("fit_report.json", fit_report_to_json(report).dump(2) + "\n");
        std::string csv = "iteration,q\n";
        for (std::size_t i = 0; i < report.q_trace.size(); ++i)
            csv += std::to_string(i + 1) + "," + format_double(report.q_trace[i]) + "\n";
        sink.primary("q_trace.csv", csv);
    }
    if (opt.plots) {
        sink.plot("q_trace.svg", svg_line_plot({{"Q", iota_vector(report.q_trace.size(), 1.0), report.q_trace}},
                                               "EM objective", "iteration", "Q"));
        if (m > 0) {
            std::vector<PlotLine> lines;
            for (Index i = 0; i < m; ++i)
                lines.push_back({"z" + std::to_string(i), iota_vector(std::size_t(report.z_hat_final.cols()), 1.0),
                                 row_vector(report.z_hat_final, i)});
            sink.plot("latent.svg", svg_line_plot(lines, "Filtered latent states", "sample", "value"));
        }
    }
    if (!report.converged)
        sink.diag() << "note: EM stopped at max_iter (" << report.iterations << ") before meeting the tolerance\n";
    return exit_ok;
}

int run_predict(const RunConfig& cfg, const Options& opt, Sink& sink) {
    const fs::path model_path = opt.model.empty() ? cfg.model : opt.model;
    if (model_path.empty())
        throw ConfigError("predict: no model given (config \"model\" or --model)");
    const Params params = params_from_json(load_json(model_path));
    const DataSource src = resolve_data(cfg, opt.data);
    const Series series = src.provider(opt.seed.value_or(cfg.seed));
    const auto observed = default_observed(cfg, series.channels(), cfg.hidden);
    if (Index(observed.size()) != params.n())
        throw DimensionError("predict: model has " + std::to_string(params.n()) + " observed channels, selection has "
                             + std::to_string(observed.size()));
    const Series x = series.select(observed);
    const Index T = x.length();
    const Index first = std::max(cfg.horizon, Index(std::floor(cfg.train_fraction * double(T))));
    const auto report = evaluate_model(params, x.values, Inputs::zeros(params.p(), 0), cfg.horizon, first, {},
                                       cfg.em.memory_horizon);
    if (opt.format == "json")
        sink.primary("prediction.json", prediction_to_json(report, x.channel_labels).dump(2) + "\n");
    else
        sink.primary("prediction.csv", prediction_to_csv(report, x.channel_labels));
    if (opt.plots) {
        std::vector<PlotLine> lines;
        const auto t = iota_vector(std::size_t(report.truth.cols()), double(report.first_target));
        for (Index i = 0; i < report.truth.rows(); ++i) {
            const std::string label = i < Index(x.channel_labels.size()) ? x.channel_labels[std::size_t(i)]
                                                                         : std::to_string(i);
            lines.push_back({label, t, row_vector(report.truth, i)});
            lines.push_back({label + " predicted", t, row_vector(report.predictions, i)});
        }
        sink.plot("prediction.svg", svg_line_plot(lines, std::to_string(report.horizon) + "-step predictions",
                                                  "sample", "value"));
    }
    return exit_ok;
}

ComparisonOptions comparison_options(const RunConfig& cfg, const Options& opt) {
    ComparisonOptions o;
    o.horizon = cfg.horizon;
    o.train_fraction = cfg.train_fraction;
    o.n_seeds = cfg.seeds;
    o.base_seed = opt.seed.value_or(cfg.seed);
    o.threads = opt.threads.value_or(cfg.threads > 0 ? cfg.threads : default_threads());
    o.p = cfg.p;
    o.em = cfg.em;
    o.baseline = cfg.baseline;
    return o;
}

int run_compare(const RunConfig& cfg, const Options& opt, Sink& sink) {
    const DataSource src = resolve_data(cfg, opt.data);
    const ComparisonOptions options = comparison_options(cfg, opt);
    const Series probe = src.provider(options.base_seed);
    const Eigen::VectorXd alphas = channel_alphas(cfg, src, probe);

    std::vector<RowConfig> rows = cfg.rows;
    if (rows.empty() && !cfg.hidden.empty())
        rows.push_back({default_observed(cfg, probe.channels(), cfg.hidden), cfg.hidden});
    if (rows.empty()) {
        // One row per channel, hiding that channel.
        for (Index h = 0; h < probe.channels(); ++h)
            rows.push_back({default_observed(RunConfig{}, probe.channels(), {h}), {h}});
    }
    std::vector<ComparisonRow> table;
    for (const auto& r : rows) {
        if (cfg.m && *cfg.m != Index(r.hidden.size()))
            throw ConfigError("compare: m must equal the number of hidden channels in every row");
        const auto [a_obs, a_lat] = split_alphas(cfg, alphas, r.observed, r.hidden, Index(r.hidden.size()));
        table.push_back(run_latent_comparison(src.provider, r.observed, r.hidden, a_obs, a_lat, options));
    }
    if (opt.format == "json") {
        sink.primary("compare.json", comparison_to_json(table).dump(2) + "\n");
    } else {
        sink.primary("compare.csv", comparison_to_csv(table));
        sink.secondary("compare_seeds.csv", comparison_seeds_to_csv(table));
    }
    if (opt.plots) {
        std::vector<PlotLine> lines;
        for (const auto& row : table) {
            const auto& q = row.seeds.front().q_trace;
            std::string label = "hidden";
            for (Index h : row.hidden)
                label += " " + std::to_string(h);
            lines.push_back({label, iota_vector(q.size(), 1.0), q});
        }
        sink.plot("q_trace.svg", svg_line_plot(lines, "EM objective (first seed)", "iteration", "Q"));
    }
    return exit_ok;
}

int run_sweep(const RunConfig& cfg, const Options& opt, Sink& sink) {
    if (!cfg.sweep)
        throw ConfigError("sweep: config needs a \"sweep\" section");
    const DataSource src = resolve_data(cfg, opt.data);
    const ComparisonOptions options = comparison_options(cfg, opt);
    const Series probe = src.provider(options.base_seed);
    const Eigen::VectorXd alphas = channel_alphas(cfg, src, probe);
    if (alphas.size() == 0)
        throw ConfigError("sweep: fractional orders are required for dataset input (\"alphas\")");
    const SweepTable table = run_reveal_sweep(src.provider, *cfg.sweep, alphas, options);
    if (opt.format == "json")
        sink.primary("sweep.json", sweep_to_json(table, probe.channel_labels).dump(2) + "\n");
    else
        sink.primary("sweep.csv", sweep_to_csv(table, probe.channel_labels));
    if (opt.plots) {
        std::vector<double> pos, without, with;
        for (std::size_t k = 0; k < table.positions.size(); ++k) {
            pos.push_back(double(k));
            without.push_back(table.positions[k].mean_without());
            with.push_back(table.positions[k].mean_with());
        }
        sink.plot("sweep.svg", svg_line_plot({{"without latent", pos, without}, {"with latent", pos, with}},
                                             "Reveal sweep", "revealed channels", "mean relative error"));
    }
    return exit_ok;
}

int run_estimate_alpha(const RunConfig& cfg, const Options& opt, Sink& sink) {
    const DataSource src = resolve_data(cfg, opt.data);
    const Series series = src.provider(opt.seed.value_or(cfg.seed));
    const OrderEstimate est = estimate_fractional_orders(series.values);
    if (opt.format == "json")
        sink.primary("orders.json", orders_to_json(est, series.channel_labels).dump(2) + "\n");
    else
        sink.primary("orders.csv", orders_to_csv(est, series.channel_labels));
    return exit_ok;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Identification of fractional-order networks with latent nodes and unknown inputs"};
    app.name("fracnet");
    app.require_subcommand(1);
    app.fallthrough();

    Options opt;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", opt.config, "Run configuration (JSON)");
    auto* seed_opt = app.add_option("--seed", seed, "Seed (overrides the config)");
    app.add_option("--out", opt.out_dir, "Output directory (default: config \"output\", else stdout)");
    auto* threads_opt = app.add_option("--threads", threads, "Worker threads (default: FRACNET_THREADS or 1)")
                            ->check(CLI::PositiveNumber);
    app.add_option("--format", opt.format, "Table format")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--plots", opt.plots, "Also write SVG plots to the output directory");
    app.add_option("--data", opt.data, "Dataset CSV (overrides the config)");
    app.add_option("--model", opt.model, "Model JSON for predict (overrides the config)");

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate", "Simulate the configured network to trajectories"},
        {"fit", "Fit the latent model by EM"},
        {"predict", "Score a saved model with rolling k-step predictions"},
        {"compare", "With- vs without-latent prediction errors over seeds"},
        {"sweep", "Reveal sweep over a hidden channel pool"},
        {"estimate-alpha", "Fractional orders by detrended fluctuation analysis"},
    };
    for (const auto& [name, help] : commands)
        app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return exit_ok;
        }
        err << "usage error: " << e.what() << "\n" << app.help();
        return exit_usage;
    }
    if (seed_opt->count() > 0)
        opt.seed = seed;
    if (threads_opt->count() > 0)
        opt.threads = threads;
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        RunConfig cfg;
        if (!opt.config.empty())
            cfg = load_run_config(opt.config);
        else if (opt.data.empty())
            throw ConfigError(command + ": --config is required");
        else
            cfg.dataset = opt.data;
        Sink sink(opt.out_dir.empty() ? cfg.output : opt.out_dir, out, err);
        if (command == "simulate")
            return run_simulate(cfg, opt, sink);
        if (command == "fit")
            return run_fit(cfg, opt, sink);
        if (command == "predict")
            return run_predict(cfg, opt, sink);
        if (command == "compare")
            return run_compare(cfg, opt, sink);
        if (command == "sweep")
            return run_sweep(cfg, opt, sink);
        return run_estimate_alpha(cfg, opt, sink);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_usage;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return exit_data;
    } catch (const DimensionError& e) {
        err << "dimension error: " << e.what() << "\n";
        return exit_data;
    } catch (const fs::filesystem_error& e) {
        err << "io error: " << e.what() << "\n";
        return exit_data;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_data;
    }
}

} // namespace fracnet
