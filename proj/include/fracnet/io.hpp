#ifndef FRACNET_IO_HPP
#define FRACNET_IO_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "fracnet/em.hpp"
#include "fracnet/eval.hpp"
#include "fracnet/model.hpp"

namespace fracnet {

using Json = nlohmann::json;

inline constexpr const char* kParamsFormat = "fracnet.params";
inline constexpr int kParamsVersion = 1;
inline constexpr const char* kFitReportFormat = "fracnet.fit_report";
inline constexpr const char* kFitReportVersion = "1.0.0";

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// ---- CSV time series: rows = time, header = channel labels, optional leading "# sample_rate=<Hz>" line.

Series parse_csv(std::string_view text, const std::string& source = "<memory>");
Series load_csv(const std::filesystem::path& path);
std::string to_csv(const Series& series);
void save_csv(const std::filesystem::path& path, const Series& series);

/// Writes text to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
Json load_json(const std::filesystem::path& path);

// ---- JSON documents. Matrices are {"rows", "cols", "data"} with row-major data.

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& what);

Json params_to_json(const Params& params);
Params params_from_json(const Json& j);

Json fit_report_to_json(const FitReport& report, bool include_theta_trace = true);
Json prediction_to_json(const PredictionReport& report, const std::vector<std::string>& labels = {});
std::string prediction_to_csv(const PredictionReport& report, const std::vector<std::string>& labels = {});

/// Table-I-style summary: one line per row with space-separated per-node medians.
std::string comparison_to_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_seeds_to_csv(const std::vector<ComparisonRow>& rows);
Json comparison_to_json(const std::vector<ComparisonRow>& rows);

/// Table-III-style summary: one line per sweep position.
std::string sweep_to_csv(const SweepTable& table, const std::vector<std::string>& labels = {});
Json sweep_to_json(const SweepTable& table, const std::vector<std::string>& labels = {});

std::string orders_to_csv(const OrderEstimate& est, const std::vector<std::string>& labels = {});
Json orders_to_json(const OrderEstimate& est, const std::vector<std::string>& labels = {});

// ---- SVG line plots.

struct PlotLine {
    std::string label;
    std::vector<double> x, y;
};

std::string svg_line_plot(const std::vector<PlotLine>& lines, const std::string& title, const std::string& x_label,
                          const std::string& y_label);

} // namespace fracnet

#endif // FRACNET_IO_HPP
