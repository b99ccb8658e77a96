#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fracnet/error.hpp"
#include "fracnet/io.hpp"

namespace fracnet {

namespace {

constexpr const char* kSampleRateTag = "# sample_rate=";

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_cells(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return cells;
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty())
        return false;
    const char* first = text.data();
    if (*first == '+')
        ++first;
    const auto res = std::from_chars(first, text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::string ids_text(const std::vector<Index>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i)
        out += (i ? " " : "") + std::to_string(ids[i]);
    return out;
}

std::string values_text(const Eigen::VectorXd& v) {
    std::string out;
    for (Index i = 0; i < v.size(); ++i)
        out += (i ? " " : "") + format_double(v(i));
    return out;
}

std::string label_of(const std::vector<std::string>& labels, Index i) {
    return std::size_t(i) < labels.size() ? labels[std::size_t(i)] : "ch" + std::to_string(i);
}

void check_cell(const std::string& text, const std::string& what) {
    if (text.find_first_of(",\n\r\"") != std::string::npos)
        throw DataError(what + " '" + text + "' contains a comma, quote or line break");
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw DataError(what + ": unknown key '" + key + "'");
}

const Json& require_key(const Json& j, const std::string& key, const std::string& what) {
    if (!j.is_object() || !j.contains(key))
        throw DataError(what + ": missing key '" + key + "'");
    return j.at(key);
}

} // namespace

std::string format_double(double value) {
    if (!std::isfinite(value)) {
        if (std::isnan(value))
            return "nan";
        return value > 0 ? "inf" : "-inf";
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

Series parse_csv(std::string_view text, const std::string& source) {
    Series out;
    std::vector<std::vector<double>> rows;
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty())
            continue;
        if (line.front() == '#') {
            if (line.rfind(kSampleRateTag, 0) == 0) {
                double rate = 0.0;
                if (!parse_double(trim(line.substr(std::string(kSampleRateTag).size())), rate) || !(rate > 0.0))
                    throw DataError(source + ": line " + std::to_string(line_no) + ": invalid sample rate");
                out.sample_rate = rate;
            }
            continue;
        }
        auto cells = split_cells(line);
        if (!have_header) {
            out.channel_labels = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != out.channel_labels.size())
            throw DataError(source + ": line " + std::to_string(line_no) + ": expected "
                            + std::to_string(out.channel_labels.size()) + " cells, found "
                            + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!parse_double(cells[c], row[c]) || !std::isfinite(row[c]))
                throw DataError(source + ": line " + std::to_string(line_no) + ", column " + std::to_string(c + 1)
                                + " (" + out.channel_labels[c] + "): '" + cells[c] + "' is not a finite number");
        }
        rows.push_back(std::move(row));
    }
    if (!have_header)
        throw DataError(source + ": no header row");
    if (rows.size() < 2)
        throw DataError(source + ": need at least 2 data rows, found " + std::to_string(rows.size()));
    out.values.resize(Index(out.channel_labels.size()), Index(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t c = 0; c < rows[t].size(); ++c)
            out.values(Index(c), Index(t)) = rows[t][c];
    out.validate();
    return out;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out)
        throw DataError("write failed for '" + path.string() + "'");
}

Series load_csv(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw DataError("dataset '" + path.string() + "' does not exist");
    return parse_csv(read_text(path), path.string());
}

std::string to_csv(const Series& series) {
    series.validate();
    std::string out;
    if (series.sample_rate)
        out += kSampleRateTag + format_double(*series.sample_rate) + "\n";
    for (Index c = 0; c < series.channels(); ++c) {
        const std::string label = label_of(series.channel_labels, c);
        check_cell(label, "channel label");
        out += (c ? "," : "") + label;
    }
    out += "\n";
    for (Index t = 0; t < series.length(); ++t) {
        for (Index c = 0; c < series.channels(); ++c)
            out += (c ? "," : "") + format_double(series.values(c, t));
        out += "\n";
    }
    return out;
}

void save_csv(const std::filesystem::path& path, const Series& series) { write_text(path, to_csv(series)); }

Json load_json(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json data = Json::array();
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            data.push_back(number_or_null(m(r, c)));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what) {
    reject_unknown(j, {"rows", "cols", "data"}, what);
    const auto& rows = require_key(j, "rows", what);
    const auto& cols = require_key(j, "cols", what);
    const auto& data = require_key(j, "data", what);
    if (!rows.is_number_integer() || !cols.is_number_integer() || rows.get<long long>() < 0
        || cols.get<long long>() < 0 || !data.is_array())
        throw DataError(what + ": malformed matrix");
    const Index r = rows.get<Index>(), c = cols.get<Index>();
    if (Index(data.size()) != r * c)
        throw DimensionError(what + ": expected " + std::to_string(r * c) + " entries, found "
                             + std::to_string(data.size()));
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index k = 0; k < c; ++k) {
            const auto& v = data[std::size_t(i * c + k)];
            m(i, k) = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
            if (!v.is_null() && !v.is_number())
                throw DataError(what + ": non-numeric entry");
        }
    return m;
}

Json vector_to_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i)
        out.push_back(number_or_null(v(i)));
    return out;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& what) {
    if (!j.is_array())
        throw DataError(what + ": expected an array of numbers");
    Eigen::VectorXd v(Index(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw DataError(what + ": entry " + std::to_string(i) + " is not a number");
        v(Index(i)) = j[i].get<double>();
    }
    return v;
}

Json params_to_json(const Params& params) {
    params.validate();
    return {{"format", kParamsFormat},
            {"version", kParamsVersion},
            {"n", params.n()},
            {"m", params.m()},
            {"p", params.p()},
            {"alpha_obs", vector_to_json(params.alpha_obs)},
            {"alpha_lat", vector_to_json(params.alpha_lat)},
            {"A11", matrix_to_json(params.A11)},
            {"A12", matrix_to_json(params.A12)},
            {"A21", matrix_to_json(params.A21)},
            {"A22", matrix_to_json(params.A22)},
            {"B1", matrix_to_json(params.B1)},
            {"B2", matrix_to_json(params.B2)},
            {"Sigma1", matrix_to_json(params.Sigma1)},
            {"Sigma2", matrix_to_json(params.Sigma2)}};
}

Params params_from_json(const Json& j) {
    const std::string what = "model parameters";
    if (!j.is_object())
        throw DataError(what + ": expected a JSON object");
    reject_unknown(j,
                   {"format", "version", "n", "m", "p", "alpha_obs", "alpha_lat", "A11", "A12", "A21", "A22", "B1",
                    "B2", "Sigma1", "Sigma2"},
                   what);
    if (require_key(j, "format", what) != kParamsFormat)
        throw DataError(what + ": format tag must be '" + std::string(kParamsFormat) + "'");
    if (require_key(j, "version", what) != kParamsVersion)
        throw DataError(what + ": unsupported version " + j.at("version").dump());
    Params t;
    t.alpha_obs = vector_from_json(require_key(j, "alpha_obs", what), "alpha_obs");
    t.alpha_lat = vector_from_json(require_key(j, "alpha_lat", what), "alpha_lat");
    t.A11 = matrix_from_json(require_key(j, "A11", what), "A11");
    t.A12 = matrix_from_json(require_key(j, "A12", what), "A12");
    t.A21 = matrix_from_json(require_key(j, "A21", what), "A21");
    t.A22 = matrix_from_json(require_key(j, "A22", what), "A22");
    t.B1 = matrix_from_json(require_key(j, "B1", what), "B1");
    t.B2 = matrix_from_json(require_key(j, "B2", what), "B2");
    t.Sigma1 = matrix_from_json(require_key(j, "Sigma1", what), "Sigma1");
    t.Sigma2 = matrix_from_json(require_key(j, "Sigma2", what), "Sigma2");
    for (const char* key : {"n", "m", "p"})
        if (j.contains(key) && !j.at(key).is_number_integer())
            throw DataError(what + ": '" + key + "' must be an integer");
    if ((j.contains("n") && j.at("n").get<Index>() != t.A11.rows())
        || (j.contains("m") && j.at("m").get<Index>() != t.A22.rows())
        || (j.contains("p") && j.at("p").get<Index>() != t.B1.cols()))
        throw DimensionError(what + ": declared n/m/p disagree with the matrices");
    t.validate();
    return t;
}

Json fit_report_to_json(const FitReport& report, bool include_theta_trace) {
    Json trace = Json::array();
    if (include_theta_trace)
        for (const auto& th : report.theta_trace)
            trace.push_back(params_to_json(th));
    Json q = Json::array();
    for (double v : report.q_trace)
        q.push_back(number_or_null(v));
    const auto& c = report.config;
    Json config = {{"max_iter", c.max_iter},
                   {"rel_tol", c.rel_tol},
                   {"patience", c.patience},
                   {"acceleration", c.acceleration == Acceleration::squarem ? "squarem" : "none"},
                   {"seed", c.seed},
                   {"init_range", c.init_range},
                   {"input_tol", c.input_tol},
                   {"input_max_iter", c.input_max_iter},
                   {"normalize_latent_scale", c.normalize_latent_scale},
                   {"lambda", c.lambda ? Json(*c.lambda) : Json(nullptr)},
                   {"memory_horizon", c.memory_horizon ? Json(*c.memory_horizon) : Json(nullptr)}};
    return {{"format", kFitReportFormat},
            {"version", kFitReportVersion},
            {"iterations", report.iterations},
            {"converged", report.converged},
            {"regularized", report.regularized},
            {"lambda", report.lambda},
            {"input_nonconverged", report.input_nonconverged},
            {"input_sparsity", report.inputs_final.sparsity()},
            {"q_trace", q},
            {"theta_final", params_to_json(report.theta_final)},
            {"theta_trace", trace},
            {"inputs", matrix_to_json(report.inputs_final.values)},
            {"z_hat", matrix_to_json(report.z_hat_final)},
            {"config", config}};
}

Json prediction_to_json(const PredictionReport& report, const std::vector<std::string>& labels) {
    Json channels = Json::array();
    for (Index i = 0; i < report.per_node_error.size(); ++i)
        channels.push_back({{"channel", i},
                            {"label", label_of(labels, i)},
                            {"relative_error", number_or_null(report.per_node_error(i))},
                            {"undefined", bool(report.undefined[std::size_t(i)])}});
    return {{"horizon", report.horizon},
            {"first_target", report.first_target},
            {"mean_error", number_or_null(report.mean_error)},
            {"channels", channels},
            {"predictions", matrix_to_json(report.predictions)},
            {"truth", matrix_to_json(report.truth)}};
}

std::string prediction_to_csv(const PredictionReport& report, const std::vector<std::string>& labels) {
    std::string out = "channel,label,relative_error,undefined\n";
    for (Index i = 0; i < report.per_node_error.size(); ++i) {
        const std::string label = label_of(labels, i);
        check_cell(label, "channel label");
        out += std::to_string(i) + "," + label + "," + format_double(report.per_node_error(i)) + ","
               + (report.undefined[std::size_t(i)] ? "1" : "0") + "\n";
    }
    return out;
}

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "observed,hidden,without_latent,with_latent,win_rate,converged_fraction,seeds\n";
    for (const auto& r : rows)
        out += ids_text(r.observed) + "," + ids_text(r.hidden) + "," + values_text(r.median_without()) + ","
               + values_text(r.median_with()) + "," + format_double(r.win_rate()) + ","
               + format_double(r.converged_fraction()) + "," + std::to_string(r.seeds.size()) + "\n";
    return out;
}

std::string comparison_seeds_to_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "row,seed,node,without_latent,with_latent,em_iterations,em_converged\n";
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (const auto& s : rows[k].seeds)
            for (std::size_t i = 0; i < rows[k].observed.size(); ++i)
                out += std::to_string(k) + "," + std::to_string(s.seed) + "," + std::to_string(rows[k].observed[i])
                       + "," + format_double(s.without_latent(Index(i))) + ","
                       + format_double(s.with_latent(Index(i))) + "," + std::to_string(s.em_iterations) + ","
                       + (s.em_converged ? "1" : "0") + "\n";
    return out;
}

Json comparison_to_json(const std::vector<ComparisonRow>& rows) {
    Json table = Json::array();
    for (const auto& r : rows) {
        Json seeds = Json::array();
        for (const auto& s : r.seeds)
            seeds.push_back({{"seed", s.seed},
                             {"without_latent", vector_to_json(s.without_latent)},
                             {"with_latent", vector_to_json(s.with_latent)},
                             {"mean_without", number_or_null(s.mean_without)},
                             {"mean_with", number_or_null(s.mean_with)},
                             {"em_iterations", s.em_iterations},
                             {"em_converged", s.em_converged},
                             {"q_trace", s.q_trace}});
        table.push_back({{"observed", r.observed},
                         {"hidden", r.hidden},
                         {"median_without", vector_to_json(r.median_without())},
                         {"median_with", vector_to_json(r.median_with())},
                         {"win_rate", r.win_rate()},
                         {"converged_fraction", r.converged_fraction()},
                         {"seeds", seeds}});
    }
    return {{"rows", table}};
}

namespace {
std::string revealed_label(const SweepTable& table, std::size_t pos, const std::vector<std::string>& labels) {
    if (pos == 0)
        return "none";
    const Index id = table.spec.reveal_order[pos - 1];
    return std::size_t(id) < labels.size() ? labels[std::size_t(id)] : std::to_string(id);
}
} // namespace

std::string sweep_to_csv(const SweepTable& table, const std::vector<std::string>& labels) {
    std::string out = "position,revealed,n_observed,n_hidden,without_latent,with_latent,wins,seeds,converged\n";
    for (std::size_t k = 0; k < table.positions.size(); ++k) {
        const auto& p = table.positions[k];
        const std::string label = revealed_label(table, k, labels);
        check_cell(label, "channel label");
        const auto conv = std::count(p.em_converged.begin(), p.em_converged.end(), true);
        out += std::to_string(k) + "," + label + "," + std::to_string(p.observed.size()) + ","
               + std::to_string(p.hidden.size()) + "," + format_double(p.mean_without()) + ","
               + format_double(p.mean_with()) + "," + std::to_string(p.wins()) + ","
               + std::to_string(p.without_latent.size()) + "," + std::to_string(conv) + "\n";
    }
    return out;
}

Json sweep_to_json(const SweepTable& table, const std::vector<std::string>& labels) {
    Json positions = Json::array();
    for (std::size_t k = 0; k < table.positions.size(); ++k) {
        const auto& p = table.positions[k];
        positions.push_back({{"position", k},
                             {"revealed", revealed_label(table, k, labels)},
                             {"observed", p.observed},
                             {"hidden", p.hidden},
                             {"mean_without", p.mean_without()},
                             {"mean_with", p.mean_with()},
                             {"wins", p.wins()},
                             {"without_latent", p.without_latent},
                             {"with_latent", p.with_latent},
                             {"em_converged", p.em_converged}});
    }
    return {{"fixed_observed", table.spec.fixed_observed},
            {"reveal_order", table.spec.reveal_order},
            {"hidden_pool", table.spec.hidden_pool},
            {"positions", positions}};
}

std::string orders_to_csv(const OrderEstimate& est, const std::vector<std::string>& labels) {
    std::string out = "channel,label,alpha,hurst,degenerate\n";
    for (Index i = 0; i < est.alphas.size(); ++i) {
        const std::string label = label_of(labels, i);
        check_cell(label, "channel label");
        out += std::to_string(i) + "," + label + "," + format_double(est.alphas(i)) + ","
               + format_double(est.hurst(i)) + "," + (est.degenerate[std::size_t(i)] ? "1" : "0") + "\n";
    }
    return out;
}

Json orders_to_json(const OrderEstimate& est, const std::vector<std::string>& labels) {
    Json channels = Json::array();
    for (Index i = 0; i < est.alphas.size(); ++i)
        channels.push_back({{"channel", i},
                            {"label", label_of(labels, i)},
                            {"alpha", est.alphas(i)},
                            {"hurst", number_or_null(est.hurst(i))},
                            {"degenerate", bool(est.degenerate[std::size_t(i)])}});
    return {{"channels", channels}};
}

namespace {
std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(4);
    ss << v;
    return ss.str();
}
} // namespace

std::string svg_line_plot(const std::vector<PlotLine>& lines, const std::string& title, const std::string& x_label,
                          const std::string& y_label) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    constexpr double W = 720, H = 420, left = 70, right = 160, top = 40, bottom = 50;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& l : lines) {
        if (l.x.size() != l.y.size())
            throw DimensionError("svg_line_plot: x and y lengths differ for '" + l.label + "'");
        for (std::size_t i = 0; i < l.x.size(); ++i) {
            if (!std::isfinite(l.x[i]) || !std::isfinite(l.y[i]))
                continue;
            xmin = std::min(xmin, l.x[i]);
            xmax = std::max(xmax, l.x[i]);
            ymin = std::min(ymin, l.y[i]);
            ymax = std::max(ymax, l.y[i]);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = ymin = 0.0;
        xmax = ymax = 1.0;
    }
    if (xmax == xmin)
        xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double pw = W - left - right, ph = H - top - bottom;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
      << "</text>\n";
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = xmin + (xmax - xmin) * k / 4.0, fy = ymin + (ymax - ymin) * k / 4.0;
        s << "<text x=\"" << sx(fx) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << fmt(fx)
          << "</text>\n";
        s << "<text x=\"" << left - 6 << "\" y=\"" << sy(fy) + 4 << "\" text-anchor=\"end\">" << fmt(fy)
          << "</text>\n";
    }
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
      << "</text>\n";
    s << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(y_label) << "</text>\n";
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const char* color = palette[k % (sizeof(palette) / sizeof(*palette))];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < lines[k].x.size(); ++i)
            if (std::isfinite(lines[k].x[i]) && std::isfinite(lines[k].y[i]))
                s << sx(lines[k].x[i]) << "," << sy(lines[k].y[i]) << " ";
        s << "\"/>\n";
        const double ly = top + 14 + 18 * double(k);
        s << "<line x1=\"" << W - right + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - right + 32 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << W - right + 38 << "\" y=\"" << ly << "\">" << xml_escape(lines[k].label) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

} // namespace fracnet
