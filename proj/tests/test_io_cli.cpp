#include <unistd.h>

#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "fracnet/benchmarks.hpp"
#include "fracnet/cli.hpp"
#include "fracnet/io.hpp"
#include "oracles.hpp"

using namespace fracnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fracnet_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct CliRun {
    int code;
    std::string out, err;
};

CliRun run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "fracnet");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

void write_json(const fs::path& p, const Json& j) {
    write_text(p, j.dump(2));
}

} // namespace

TEST(Csv, RoundTripIsBitwise) {
    std::mt19937_64 rng(4);
    Series s;
    s.values = oracle::random_matrix(rng, 3, 17, 1e3);
    s.values(1, 4) = 1e-300;
    s.values(2, 9) = -0.1;
    s.channel_labels = {"a", "b", "c"};
    s.sample_rate = 250.0;
    const Series back = parse_csv(to_csv(s));
    EXPECT_TRUE((back.values.array() == s.values.array()).all());
    EXPECT_EQ(back.channel_labels, s.channel_labels);
    ASSERT_TRUE(back.sample_rate.has_value());
    EXPECT_EQ(*back.sample_rate, 250.0);
}

TEST(Csv, ReportsMalformedInputWithLocation) {
    try {
        parse_csv("a,b\n1,2\n3\n", "bad.csv");
        FAIL() << "ragged row accepted";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.csv: line 3"), std::string::npos) << e.what();
    }
    try {
        parse_csv("a,b\n1,2\n3,x\n", "bad.csv");
        FAIL() << "non-numeric cell accepted";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("(b)"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_csv("a,b\n1,2\n", "short.csv"), DataError);
    EXPECT_THROW(parse_csv("a,b\n1,2\n3,nan\n"), DataError);
    EXPECT_THROW(load_csv("/nonexistent/fracnet.csv"), DataError);
}

TEST(Csv, SkipsCommentsAndReadsSampleRate) {
    const Series s = parse_csv("# produced by hand\n# sample_rate=10\nx,y\n1,2\n3,4\n");
    EXPECT_EQ(s.channels(), 2);
    EXPECT_EQ(s.length(), 2);
    EXPECT_EQ(*s.sample_rate, 10.0);
}

TEST(FormatDouble, ShortestRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 5e-324}) {
        const std::string t = format_double(v);
        EXPECT_EQ(std::strtod(t.c_str(), nullptr), v) << t;
    }
    EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(ParamsJson, RoundTripIsBitExact) {
    std::mt19937_64 rng(8);
    Params t = Params::zeros(3, 2, 1);
    t.A11 = oracle::random_matrix(rng, 3, 3);
    t.A12 = oracle::random_matrix(rng, 3, 2);
    t.A21 = oracle::random_matrix(rng, 2, 3);
    t.A22 = oracle::random_matrix(rng, 2, 2);
    t.B1 = oracle::random_matrix(rng, 3, 1);
    t.B2 = oracle::random_matrix(rng, 2, 1);
    t.Sigma1 = oracle::random_spd(rng, 3);
    t.Sigma2 = oracle::random_spd(rng, 2);
    t.alpha_obs << 0.3, 0.7, 1.1;
    t.alpha_lat << 0.55, 0.9;
    const Params back = params_from_json(Json::parse(params_to_json(t).dump()));
    EXPECT_EQ(back.A11, t.A11);
    EXPECT_EQ(back.A12, t.A12);
    EXPECT_EQ(back.A21, t.A21);
    EXPECT_EQ(back.A22, t.A22);
    EXPECT_EQ(back.B1, t.B1);
    EXPECT_EQ(back.B2, t.B2);
    EXPECT_EQ(back.Sigma1, t.Sigma1);
    EXPECT_EQ(back.Sigma2, t.Sigma2);
    EXPECT_EQ(back.alpha_obs, t.alpha_obs);
    EXPECT_EQ(back.alpha_lat, t.alpha_lat);
}

TEST(ParamsJson, RejectsUnknownKeysAndBadVersions) {
    Json j = params_to_json(Params::zeros(1, 0, 0));
    Json extra = j;
    extra["gamma"] = 1;
    EXPECT_ANY_THROW(params_from_json(extra));
    Json ver = j;
    ver["version"] = 99;
    EXPECT_ANY_THROW(params_from_json(ver));
    Json shape = j;
    shape["A11"]["rows"] = 2;
    EXPECT_ANY_THROW(params_from_json(shape));
}

TEST(MatrixJson, NullIsNan) {
    Eigen::MatrixXd m(1, 2);
    m << 1.0, std::numeric_limits<double>::quiet_NaN();
    const Json j = matrix_to_json(m);
    EXPECT_TRUE(j["data"][1].is_null());
    EXPECT_TRUE(std::isnan(matrix_from_json(j, "m")(0, 1)));
}

TEST(RunConfig, StrictParsing) {
    Json ok = {{"version", 1}, {"dataset", "data.csv"}, {"observed", {0, 1}}, {"hidden", Json::array()}};
    const RunConfig cfg = parse_run_config(ok, "/base");
    EXPECT_EQ(cfg.dataset, fs::path("/base/data.csv"));
    EXPECT_EQ(cfg.horizon, 5);
    EXPECT_DOUBLE_EQ(cfg.train_fraction, 0.8);

    Json missing = ok;
    missing.erase("version");
    EXPECT_THROW(parse_run_config(missing), ConfigError);
    Json wrong = ok;
    wrong["version"] = 2;
    EXPECT_THROW(parse_run_config(wrong), ConfigError);
    Json unknown = ok;
    unknown["horizn"] = 3;
    EXPECT_THROW(parse_run_config(unknown), ConfigError);
    Json nested = ok;
    nested["em"] = {{"max_iters", 3}};
    EXPECT_THROW(parse_run_config(nested), ConfigError);
    Json typed = ok;
    typed["horizon"] = "five";
    EXPECT_THROW(parse_run_config(typed), ConfigError);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run_cli({"--help"}).code, exit_ok);
    EXPECT_EQ(run_cli({"bogus"}).code, exit_usage);
    EXPECT_EQ(run_cli({"fit", "--config", "/nonexistent/config.json"}).code, exit_usage);

    const fs::path dir = scratch_dir("exit");
    write_json(dir / "cfg.json", {{"version", 1}, {"dataset", "missing.csv"}, {"alphas", {0.5, 0.5}}});
    const auto r = run_cli({"fit", "--config", (dir / "cfg.json").string()});
    EXPECT_EQ(r.code, exit_data);
    EXPECT_NE(r.err.find("missing.csv"), std::string::npos) << r.err;
    fs::remove_all(dir);
}

TEST(Cli, SimulateFitPredictPipeline) {
    const fs::path dir = scratch_dir("pipeline");
    write_json(dir / "sim.json", {{"version", 1},
                                  {"simulation", {{"benchmark", "three_node"}, {"samples", 121}}},
                                  {"seed", 3}});
    const auto sim = run_cli({"simulate", "--config", (dir / "sim.json").string(), "--out", (dir / "sim").string()});
    ASSERT_EQ(sim.code, exit_ok) << sim.err;
    const Series data = load_csv(dir / "sim" / "trajectories.csv");
    EXPECT_EQ(data.length(), 121);
    EXPECT_EQ(data.values, three_node_network().simulate(121, 3).values);

    write_json(dir / "fit.json", {{"version", 1},
                                  {"dataset", "sim/trajectories.csv"},
                                  {"observed", {0, 1}},
                                  {"hidden", {2}},
                                  {"alphas", {0.7, 1.1, 0.8}},
                                  {"em", {{"max_iter", 20}}},
                                  {"model", "fitted/model.json"}});
    const auto fitted =
        run_cli({"fit", "--config", (dir / "fit.json").string(), "--out", (dir / "fitted").string(), "--plots"});
    ASSERT_EQ(fitted.code, exit_ok) << fitted.err;
    EXPECT_TRUE(fs::exists(dir / "fitted" / "q_trace.csv"));
    EXPECT_TRUE(fs::exists(dir / "fitted" / "q_trace.svg"));
    const Json report = load_json(dir / "fitted" / "fit_report.json");
    EXPECT_EQ(report["format"], kFitReportFormat);
    const Params model = params_from_json(load_json(dir / "fitted" / "model.json"));
    EXPECT_EQ(model.n(), 2);
    EXPECT_EQ(model.m(), 1);

    const auto pred = run_cli({"predict", "--config", (dir / "fit.json").string(), "--format", "json"});
    ASSERT_EQ(pred.code, exit_ok) << pred.err;
    const Json pj = Json::parse(pred.out);
    EXPECT_EQ(pj["horizon"], 5);
    fs::remove_all(dir);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    const fs::path dir = scratch_dir("determinism");
    write_json(dir / "cfg.json", {{"version", 1},
                                  {"simulation", {{"benchmark", "three_node"}, {"samples", 81}}},
                                  {"observed", {0, 1}},
                                  {"hidden", {2}},
                                  {"seeds", 2},
                                  {"em", {{"max_iter", 10}}}});
    const auto a = run_cli({"compare", "--config", (dir / "cfg.json").string()});
    const auto b = run_cli({"compare", "--config", (dir / "cfg.json").string(), "--threads", "2"});
    ASSERT_EQ(a.code, exit_ok) << a.err;
    EXPECT_FALSE(a.out.empty());
    EXPECT_EQ(a.out, b.out);
    fs::remove_all(dir);
}
