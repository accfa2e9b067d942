#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sestrack/harness.hpp"

namespace sestrack {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SeriesFile {
  std::filesystem::path source;
  std::map<std::string, std::vector<double>> columns;
  std::size_t rows = 0;
};

/// Reads the named columns of a comma-separated file with a header row.
/// Every value in a requested column must parse as a finite number; the
/// error message cites the 1-based data row.
SeriesFile read_series_file(const std::filesystem::path& path,
                            const std::vector<std::string>& columns);

std::vector<double> read_csv_column(const std::filesystem::path& path, const std::string& column);

/// Smoother output aligned by observation index: estimates[i] is the estimate
/// after x_{i+1} has been absorbed (m_hat_{i+2}). `trend` may be empty.
struct Trajectory {
  std::vector<double> observations;
  std::vector<double> trend;
  std::vector<double> estimates;
};

/// Builds a Trajectory from a full ses_run output (length T + 1).
Trajectory make_trajectory(std::vector<double> observations, std::vector<double> trend,
                           std::span<const double> ses_output);

enum class OutputFormat { Csv, Svg };

/// 17 significant digits, '.' decimal separator regardless of locale.
std::string format_csv_number(double value);

std::string to_csv(const Trajectory& trajectory);
std::string to_csv(const MseCurve& curve);
/// Exact D sequence (D_1..D_{T+1}) paired as the Monte Carlo curve: row t holds D_{t+1}.
std::string exact_mse_to_csv(std::span<const double> mse);

std::string to_svg(const Trajectory& trajectory, const std::string& title = "");
std::string to_svg(const MseCurve& curve, const std::string& title = "");

std::filesystem::path write_results(const Trajectory& trajectory, const std::filesystem::path& path,
                                    OutputFormat format);
std::filesystem::path write_results(const MseCurve& curve, const std::filesystem::path& path,
                                    OutputFormat format);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

struct PlotSeries {
  enum class Style { Points, Line };
  std::string label;
  std::vector<double> values;
  Style style = Style::Line;
  std::string color = "#1f77b4";
};

/// Self-contained SVG with a fixed 800x500 viewBox; x runs over 1..n.
std::string render_svg(std::span<const PlotSeries> series, const std::string& title);

inline constexpr int kConfigSchemaVersion = 1;

/// JSON experiment description. Unknown keys are rejected at every level.
struct ConfigDocument {
  ExperimentConfig experiment;
  /// Lipschitz constant to use for the bound instead of the trend's own.
  std::optional<double> bound_k;
  std::optional<std::string> csv_output;
  std::optional<std::string> svg_output;
};

ConfigDocument parse_config(const std::string& json_text);
ConfigDocument load_config(const std::filesystem::path& path);
std::string serialize_config(const ConfigDocument& document);

}  // namespace sestrack
