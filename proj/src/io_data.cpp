#include "sestrack/io_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "sestrack/overloaded.hpp"

namespace sestrack {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

}  // namespace

SeriesFile read_series_file(const std::filesystem::path& path,
                            const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));

  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("'{}' is empty", path.string()));
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  const auto header = split_fields(line);
  std::vector<std::string> names(header.begin(), header.end());

  std::vector<std::size_t> positions;
  for (const auto& wanted : columns) {
    const auto it = std::find(names.begin(), names.end(), wanted);
    if (it == names.end()) {
      throw DataError(fmt::format("column '{}' not found in '{}'; available columns: {}", wanted,
                                  path.string(), fmt::join(names, ", ")));
    }
    positions.push_back(static_cast<std::size_t>(it - names.begin()));
  }

  SeriesFile file;
  file.source = path;
  for (const auto& c : columns) file.columns[c];
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (positions[c] >= fields.size()) {
        throw DataError(fmt::format("{}: row {} has no value for column '{}'", path.string(), row,
                                    columns[c]));
      }
      const auto value = parse_number(fields[positions[c]]);
      if (!value) {
        throw DataError(fmt::format("{}: row {}: column '{}' value '{}' is not a finite number",
                                    path.string(), row, columns[c], fields[positions[c]]));
      }
      file.columns[columns[c]].push_back(*value);
    }
  }
  file.rows = row;
  return file;
}

std::vector<double> read_csv_column(const std::filesystem::path& path, const std::string& column) {
  auto file = read_series_file(path, {column});
  return std::move(file.columns.at(column));
}

Trajectory make_trajectory(std::vector<double> observations, std::vector<double> trend,
                           std::span<const double> ses_output) {
  if (ses_output.size() != observations.size() + 1) {
    throw std::invalid_argument("smoother output must have one more entry than the observations");
  }
  if (!trend.empty() && trend.size() != observations.size()) {
    throw std::invalid_argument("trend and observations differ in length");
  }
  Trajectory out;
  out.observations = std::move(observations);
  out.trend = std::move(trend);
  out.estimates.assign(ses_output.begin() + 1, ses_output.end());
  return out;
}

std::string format_csv_number(double value) { return fmt::format("{:.17g}", value); }

std::string to_csv(const Trajectory& trajectory) {
  const bool with_trend = !trajectory.trend.empty();
  std::string out = with_trend ? "t,x,m_star,m_hat\n" : "t,x,m_hat\n";
  for (std::size_t i = 0; i < trajectory.observations.size(); ++i) {
    out += fmt::format("{},{}", i + 1, format_csv_number(trajectory.observations[i]));
    if (with_trend) out += "," + format_csv_number(trajectory.trend[i]);
    out += "," + format_csv_number(trajectory.estimates[i]) + "\n";
  }
  return out;
}

std::string to_csv(const MseCurve& curve) {
  std::string out = "t,mse,standard_error\n";
  for (std::size_t i = 0; i < curve.mse.size(); ++i) {
    out += fmt::format("{},{},{}\n", i + 1, format_csv_number(curve.mse[i]),
                       format_csv_number(curve.standard_error[i]));
  }
  return out;
}

std::string exact_mse_to_csv(std::span<const double> mse) {
  std::string out = "t,mse\n";
  for (std::size_t i = 1; i < mse.size(); ++i)
    out += fmt::format("{},{}\n", i, format_csv_number(mse[i]));
  return out;
}

namespace {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

}  // namespace

std::string render_svg(std::span<const PlotSeries> series, const std::string& title) {
  std::size_t n = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo <= hi)) lo = hi = 0.0;
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double x_span = n > 1 ? static_cast<double>(n - 1) : 1.0;
  auto px = [&](std::size_t i) { return kLeft + plot_w * static_cast<double>(i) / x_span; };
  auto py = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\" width=\"800\" "
         "height=\"500\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  if (!title.empty()) {
    out += fmt::format(
        "<text x=\"400\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"14\">{}</text>\n",
        xml_escape(title));
  }
  out += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
      "stroke=\"#444\"/>\n",
      kLeft, kTop, plot_w, plot_h);

  // y ticks
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    out += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" font-family=\"sans-serif\" "
        "font-size=\"11\">{:.4g}</text>\n",
        kLeft - 6.0, py(v) + 4.0, v);
  }
  // x ticks
  for (int k = 0; k <= 4; ++k) {
    const auto i = static_cast<std::size_t>(std::llround(x_span * k / 4.0));
    out += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"11\">{}</text>\n",
        px(i), kTop + plot_h + 18.0, i + 1);
  }
  out += fmt::format(
      "<text x=\"400\" y=\"{:.2f}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      "font-size=\"12\">t</text>\n",
      kHeight - 10.0);

  for (const auto& s : series) {
    if (s.style == PlotSeries::Style::Points) {
      out += fmt::format("<g fill=\"{}\" fill-opacity=\"0.35\">\n", xml_escape(s.color));
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        if (!std::isfinite(s.values[i])) continue;
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.6\"/>\n", px(i), py(s.values[i]));
      }
      out += "</g>\n";
    } else {
      out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\" points=\"",
                         xml_escape(s.color));
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        if (!std::isfinite(s.values[i])) continue;
        out += fmt::format("{:.2f},{:.2f} ", px(i), py(s.values[i]));
      }
      out += "\"/>\n";
    }
  }

  // legend
  double ly = kTop + 14.0;
  for (const auto& s : series) {
    const double lx = kLeft + 12.0;
    if (s.style == PlotSeries::Style::Points) {
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", lx + 9.0,
                         ly - 4.0, xml_escape(s.color));
    } else {
      out += fmt::format(
          "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
          "stroke-width=\"2\"/>\n",
          lx, ly - 4.0, lx + 18.0, ly - 4.0, xml_escape(s.color));
    }
    out += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        lx + 24.0, ly, xml_escape(s.label));
    ly += 16.0;
  }
  out += "</svg>\n";
  return out;
}

std::string to_svg(const Trajectory& trajectory, const std::string& title) {
  std::vector<PlotSeries> series;
  series.push_back({"observations", trajectory.observations, PlotSeries::Style::Points, "#7f7f7f"});
  if (!trajectory.trend.empty())
    series.push_back({"trend", trajectory.trend, PlotSeries::Style::Line, "#d62728"});
  series.push_back({"estimate", trajectory.estimates, PlotSeries::Style::Line, "#1f77b4"});
  return render_svg(series, title);
}

std::string to_svg(const MseCurve& curve, const std::string& title) {
  std::vector<double> upper(curve.mse.size());
  for (std::size_t i = 0; i < upper.size(); ++i) upper[i] = curve.mse[i] + 2.0 * curve.standard_error[i];
  const std::vector<PlotSeries> series = {
      {"empirical MSE", curve.mse, PlotSeries::Style::Line, "#1f77b4"},
      {"MSE + 2 SE", std::move(upper), PlotSeries::Style::Line, "#aec7e8"},
  };
  return render_svg(series, title);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  out << contents;
  out.close();
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

std::filesystem::path write_results(const Trajectory& trajectory, const std::filesystem::path& path,
                                    OutputFormat format) {
  write_text_file(path, format == OutputFormat::Csv ? to_csv(trajectory) : to_svg(trajectory));
  return path;
}

std::filesystem::path write_results(const MseCurve& curve, const std::filesystem::path& path,
                                    OutputFormat format) {
  write_text_file(path, format == OutputFormat::Csv ? to_csv(curve) : to_svg(curve));
  return path;
}

// ---------------------------------------------------------------------------
// JSON configuration

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw DataError(fmt::format("config: '{}' must be an object", where));
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw DataError(fmt::format("config: unknown key '{}' in {}; allowed: {}", key, where,
                                  fmt::join(allowed, ", ")));
    }
  }
}

const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw DataError(fmt::format("config: missing key '{}' in {}", key, where));
  return j.at(key);
}

double get_number(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number()) throw DataError(fmt::format("config: '{}.{}' must be a number", where, key));
  return v.get<double>();
}

double get_number_or(const json& j, const std::string& key, const std::string& where,
                     double fallback) {
  return j.contains(key) ? get_number(j, key, where) : fallback;
}

std::int64_t get_integer(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number_integer())
    throw DataError(fmt::format("config: '{}.{}' must be an integer", where, key));
  return v.get<std::int64_t>();
}

std::string get_string(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_string()) throw DataError(fmt::format("config: '{}.{}' must be a string", where, key));
  return v.get<std::string>();
}

NoiseModel noise_from_json(const json& j) {
  require_object(j, "noise");
  const std::string model = get_string(j, "model", "noise");
  if (model == "white") {
    check_keys(j, {"model", "variance"}, "noise");
    return WhiteGaussian{get_number_or(j, "variance", "noise", 1.0)};
  }
  if (model == "ma1") {
    check_keys(j, {"model", "a", "variance"}, "noise");
    return MA1{get_number(j, "a", "noise"), get_number_or(j, "variance", "noise", 1.0)};
  }
  if (model == "ar1") {
    check_keys(j, {"model", "theta", "variance"}, "noise");
    return AR1{get_number(j, "theta", "noise"), get_number_or(j, "variance", "noise", 1.0)};
  }
  if (model == "maq") {
    check_keys(j, {"model", "coefficients", "variance"}, "noise");
    const json& c = require(j, "coefficients", "noise");
    if (!c.is_array()) throw DataError("config: 'noise.coefficients' must be an array");
    MAq m;
    for (const auto& b : c) {
      if (!b.is_number()) throw DataError("config: 'noise.coefficients' must hold numbers");
      m.coefficients.push_back(b.get<double>());
    }
    m.variance = get_number_or(j, "variance", "noise", 1.0);
    return m;
  }
  throw DataError(fmt::format("config: unknown noise model '{}' (white, ma1, ar1, maq)", model));
}

json noise_to_json(const NoiseModel& noise) {
  return std::visit(overloaded{
                        [](const WhiteGaussian& m) {
                          return json{{"model", "white"}, {"variance", m.variance}};
                        },
                        [](const MA1& m) {
                          return json{{"model", "ma1"}, {"a", m.a}, {"variance", m.variance}};
                        },
                        [](const AR1& m) {
                          return json{{"model", "ar1"}, {"theta", m.theta}, {"variance", m.variance}};
                        },
                        [](const MAq& m) {
                          return json{{"model", "maq"},
                                      {"coefficients", m.coefficients},
                                      {"variance", m.variance}};
                        },
                    },
                    noise);
}

TrendSpec trend_from_json(const json& j) {
  require_object(j, "trend");
  const std::string shape = get_string(j, "shape", "trend");
  if (shape == "constant") {
    check_keys(j, {"shape", "level"}, "trend");
    return ConstantTrend{get_number(j, "level", "trend")};
  }
  if (shape == "linear") {
    check_keys(j, {"shape", "start", "slope"}, "trend");
    return LinearTrend{get_number(j, "start", "trend"), get_number(j, "slope", "trend")};
  }
  if (shape == "sin") {
    check_keys(j, {"shape", "amplitude", "rate", "phase"}, "trend");
    return SinusoidTrend{get_number(j, "amplitude", "trend"), get_number(j, "rate", "trend"),
                         get_number_or(j, "phase", "trend", 0.0)};
  }
  if (shape == "table") {
    check_keys(j, {"shape", "values"}, "trend");
    const json& v = require(j, "values", "trend");
    if (!v.is_array()) throw DataError("config: 'trend.values' must be an array");
    TableTrend t;
    for (const auto& x : v) {
      if (!x.is_number()) throw DataError("config: 'trend.values' must hold numbers");
      t.values.push_back(x.get<double>());
    }
    return t;
  }
  throw DataError(
      fmt::format("config: unknown trend shape '{}' (constant, linear, sin, table)", shape));
}

json trend_to_json(const TrendSpec& trend) {
  return std::visit(
      overloaded{
          [](const ConstantTrend& t) { return json{{"shape", "constant"}, {"level", t.level}}; },
          [](const LinearTrend& t) {
            return json{{"shape", "linear"}, {"start", t.start}, {"slope", t.slope}};
          },
          [](const SinusoidTrend& t) {
            return json{
                {"shape", "sin"}, {"amplitude", t.amplitude}, {"rate", t.rate}, {"phase", t.phase}};
          },
          [](const TableTrend& t) { return json{{"shape", "table"}, {"values", t.values}}; },
      },
      trend.shape());
}

InitPolicy init_from_json(const json& j) {
  require_object(j, "init");
  const std::string policy = get_string(j, "policy", "init");
  if (policy == "first") {
    check_keys(j, {"policy"}, "init");
    return FirstObservation{};
  }
  if (policy == "fixed") {
    check_keys(j, {"policy", "value"}, "init");
    return FixedInit{get_number(j, "value", "init")};
  }
  throw DataError(fmt::format("config: unknown init policy '{}' (first, fixed)", policy));
}

json init_to_json(const InitPolicy& init) {
  return std::visit(overloaded{
                        [](FirstObservation) { return json{{"policy", "first"}}; },
                        [](FixedInit f) { return json{{"policy", "fixed"}, {"value", f.value}}; },
                    },
                    init);
}

}  // namespace

ConfigDocument parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("config: invalid JSON: {}", e.what()));
  }
  require_object(root, "root");
  check_keys(root,
             {"schema_version", "noise", "trend", "alpha", "horizon", "replications", "seed", "init",
              "tail_fraction", "burn_in", "bound_k", "output"},
             "root");
  const std::int64_t version = get_integer(root, "schema_version", "root");
  if (version != kConfigSchemaVersion) {
    throw DataError(fmt::format("config: schema_version {} is not supported (expected {})", version,
                                kConfigSchemaVersion));
  }

  ConfigDocument doc;
  ExperimentConfig& e = doc.experiment;
  try {
    e.noise = noise_from_json(require(root, "noise", "root"));
    e.trend = trend_from_json(require(root, "trend", "root"));
  } catch (const std::invalid_argument& err) {
    throw DataError(fmt::format("config: {}", err.what()));
  }
  e.alpha = get_number(root, "alpha", "root");
  e.horizon = get_integer(root, "horizon", "root");
  if (root.contains("replications")) e.replications = get_integer(root, "replications", "root");
  if (root.contains("seed")) {
    const json& s = root.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      throw DataError("config: 'seed' must be a non-negative integer");
    e.seed = s.get<std::uint64_t>();
  }
  if (root.contains("init")) e.init = init_from_json(root.at("init"));
  e.tail_fraction = get_number_or(root, "tail_fraction", "root", 0.1);
  if (root.contains("burn_in")) e.burn_in = get_integer(root, "burn_in", "root");
  if (root.contains("bound_k")) doc.bound_k = get_number(root, "bound_k", "root");
  if (root.contains("output")) {
    const json& o = root.at("output");
    require_object(o, "output");
    check_keys(o, {"csv", "svg"}, "output");
    if (o.contains("csv")) doc.csv_output = get_string(o, "csv", "output");
    if (o.contains("svg")) doc.svg_output = get_string(o, "svg", "output");
  }
  try {
    validate(e);
  } catch (const std::invalid_argument& err) {
    throw DataError(fmt::format("config: {}", err.what()));
  }
  return doc;
}

ConfigDocument load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const ConfigDocument& document) {
  const ExperimentConfig& e = document.experiment;
  json root;
  root["schema_version"] = kConfigSchemaVersion;
  root["noise"] = noise_to_json(e.noise);
  root["trend"] = trend_to_json(e.trend);
  root["alpha"] = e.alpha;
  root["horizon"] = e.horizon;
  root["replications"] = e.replications;
  root["seed"] = e.seed;
  root["init"] = init_to_json(e.init);
  root["tail_fraction"] = e.tail_fraction;
  root["burn_in"] = e.burn_in;
  if (document.bound_k) root["bound_k"] = *document.bound_k;
  if (document.csv_output || document.svg_output) {
    json o = json::object();
    if (document.csv_output) o["csv"] = *document.csv_output;
    if (document.svg_output) o["svg"] = *document.svg_output;
    root["output"] = o;
  }
  return root.dump(2) + "\n";
}

}  // namespace sestrack
