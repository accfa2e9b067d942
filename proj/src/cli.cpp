#include "sestrack/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "sestrack/harness.hpp"
#include "sestrack/io_data.hpp"
#include "sestrack/theory.hpp"

namespace sestrack::cli {

namespace {

using nlohmann::json;

std::optional<double> to_number(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

struct ParsedSpec {
  std::string name;
  std::map<std::string, std::string, std::less<>> params;
};

ParsedSpec split_spec(std::string_view spec, std::string_view kind) {
  ParsedSpec out;
  const auto colon = spec.find(':');
  out.name = std::string(spec.substr(0, colon));
  if (out.name.empty()) throw SpecError(fmt::format("empty {} spec", kind));
  if (colon == std::string_view::npos) return out;
  std::string_view rest = spec.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw SpecError(fmt::format("{} spec '{}': expected key=value, got '{}'", kind, spec, item));
    }
    const std::string key(item.substr(0, eq));
    if (!out.params.emplace(key, std::string(item.substr(eq + 1))).second)
      throw SpecError(fmt::format("{} spec '{}': duplicate key '{}'", kind, spec, key));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

class SpecReader {
 public:
  SpecReader(ParsedSpec parsed, std::string_view original, std::string_view kind)
      : parsed_(std::move(parsed)), original_(original), kind_(kind) {}

  std::optional<double> optional_number(const std::string& key) {
    const auto it = parsed_.params.find(key);
    if (it == parsed_.params.end()) return std::nullopt;
    used_.push_back(key);
    const auto value = to_number(it->second);
    if (!value) {
      throw SpecError(fmt::format("{} spec '{}': '{}' is not a number", kind_, original_, it->second));
    }
    return value;
  }

  double number(const std::string& key) {
    const auto value = optional_number(key);
    if (!value) throw SpecError(fmt::format("{} spec '{}': missing '{}'", kind_, original_, key));
    return *value;
  }

  std::string text(const std::string& key) {
    const auto it = parsed_.params.find(key);
    if (it == parsed_.params.end())
      throw SpecError(fmt::format("{} spec '{}': missing '{}'", kind_, original_, key));
    used_.push_back(key);
    return it->second;
  }

  bool has(const std::string& key) const { return parsed_.params.count(key) > 0; }

  // Innovation variance from var=V or sigma=S (standard deviation), default 1.
  double variance() {
    if (has("var") && has("sigma"))
      throw SpecError(fmt::format("{} spec '{}': give var or sigma, not both", kind_, original_));
    if (has("sigma")) {
      const double s = number("sigma");
      return s * s;
    }
    return optional_number("var").value_or(1.0);
  }

  void finish() const {
    for (const auto& [key, value] : parsed_.params) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end())
        throw SpecError(fmt::format("{} spec '{}': unknown key '{}'", kind_, original_, key));
    }
  }

 private:
  ParsedSpec parsed_;
  std::string_view original_;
  std::string_view kind_;
  std::vector<std::string> used_;
};

}  // namespace

std::string spec_grammar() {
  return "spec grammar: name:key=value,key=value\n"
         "  noise: white:var=V\n"
         "         ma1:a=A[,var=V|,sigma=S]        (normalized so gamma(0) = V)\n"
         "         ar1:theta=T[,var=V|,sigma=S]    (0 < T < 1; V is the innovation variance)\n"
         "         maq:b1=B1,b2=B2,...[,var=V|,sigma=S]\n"
         "  trend: const:level=L\n"
         "         linear:start=S,slope=D\n"
         "         sin:amp=A,rate=R[,phase=P]\n"
         "         table:file=PATH,column=NAME\n"
         "  examples: ar1:theta=0.2,sigma=1  linear:start=2,slope=0.1  "
         "sin:amp=1,rate=0.0031415926,phase=0\n";
}

NoiseModel parse_noise_spec(std::string_view spec) {
  SpecReader r(split_spec(spec, "noise"), spec, "noise");
  const std::string name = split_spec(spec, "noise").name;
  NoiseModel model;
  if (name == "white") {
    model = WhiteGaussian{r.variance()};
  } else if (name == "ma1") {
    const double a = r.number("a");
    model = MA1{a, r.variance()};
  } else if (name == "ar1") {
    const double theta = r.number("theta");
    model = AR1{theta, r.variance()};
  } else if (name == "maq") {
    MAq m;
    for (int j = 1; r.has(fmt::format("b{}", j)); ++j) m.coefficients.push_back(r.number(fmt::format("b{}", j)));
    if (m.coefficients.empty()) throw SpecError(fmt::format("noise spec '{}': maq needs b1", spec));
    m.variance = r.variance();
    model = m;
  } else {
    throw SpecError(fmt::format("unknown noise model '{}'", name));
  }
  r.finish();
  try {
    validate(model);
  } catch (const std::invalid_argument& e) {
    throw SpecError(fmt::format("noise spec '{}': {}", spec, e.what()));
  }
  return model;
}

TrendSpec parse_trend_spec(std::string_view spec) {
  SpecReader r(split_spec(spec, "trend"), spec, "trend");
  const std::string name = split_spec(spec, "trend").name;
  std::optional<TrendSpec::Variant> shape;
  if (name == "const" || name == "constant") {
    shape = ConstantTrend{r.number("level")};
  } else if (name == "linear") {
    const double start = r.number("start");
    shape = LinearTrend{start, r.number("slope")};
  } else if (name == "sin") {
    const double amp = r.number("amp");
    const double rate = r.number("rate");
    shape = SinusoidTrend{amp, rate, r.optional_number("phase").value_or(0.0)};
  } else if (name == "table") {
    const std::string file = r.text("file");
    const std::string column = r.text("column");
    r.finish();
    return TableTrend{read_csv_column(file, column)};
  } else {
    throw SpecError(fmt::format("unknown trend shape '{}'", name));
  }
  r.finish();
  try {
    return TrendSpec(*shape);
  } catch (const std::invalid_argument& e) {
    throw SpecError(fmt::format("trend spec '{}': {}", spec, e.what()));
  }
}

namespace {

std::string text_number(double v) { return fmt::format("{:.10g}", v); }

InitPolicy parse_init(const std::string& text, const TrendSpec* trend) {
  if (text == "first") return FirstObservation{};
  if (text == "trend") {
    if (!trend) throw SpecError("--init trend needs a trend");
    return FixedInit{trend_value(*trend, 1)};
  }
  if (const auto v = to_number(text)) return FixedInit{*v};
  throw SpecError(fmt::format("--init expects 'first', 'trend' or a number, got '{}'", text));
}

json bound_json(const BoundReport& b) {
  return json{{"alpha", b.alpha},
              {"variance_term", b.variance_term},
              {"correlation_term", b.correlation_term},
              {"trend_term", b.trend_term},
              {"total", b.total},
              {"closed_form", b.closed_form},
              {"truncation_lag", b.truncation_lag},
              {"truncation_residual_bound", b.truncation_residual_bound}};
}

void print_bound(std::ostream& out, const BoundReport& b) {
  out << "alpha:            " << text_number(b.alpha) << "\n"
      << "variance_term:    " << text_number(b.variance_term) << "\n"
      << "correlation_term: " << text_number(b.correlation_term) << "\n"
      << "trend_term:       " << text_number(b.trend_term) << "\n"
      << "total:            " << text_number(b.total) << "\n";
  if (b.closed_form) {
    out << "series:           closed form\n";
  } else {
    out << "series:           truncated at lag " << b.truncation_lag << " (residual <= "
        << text_number(b.truncation_residual_bound) << ")\n";
  }
}

RunOptions run_options(unsigned threads) {
  RunOptions options;
  options.workers = threads;
  return options;
}

struct Flags {
  // shared
  std::string noise = "white:var=1";
  std::string trend = "const:level=0";
  double alpha = 0.1;
  double k = 0.0;
  std::int64_t steps = 1000;
  std::int64_t reps = 10000;
  std::uint64_t seed = kDefaultSeed;
  std::string init = "first";
  std::string out_path;
  std::string svg_path;
  bool json = false;
  unsigned threads = 0;
  // smooth
  std::string input;
  std::string column;
  // bound / optimize
  double tolerance = 1e-14;
  double search_tolerance = 1e-10;
  int grid = 1024;
  // simulate
  std::int64_t burn_in = 0;
  // mse
  std::string mode = "exact";
  std::string d1 = "zero";
  double tail = 0.1;
  // verify
  std::string config;
  std::optional<std::int64_t> verify_reps;
  // reproduce
  std::string figure;
  std::string outdir;
};

int cmd_smooth(const Flags& f, std::ostream& out) {
  auto x = read_csv_column(f.input, f.column);
  if (x.empty()) throw DataError(fmt::format("column '{}' of '{}' has no rows", f.column, f.input));
  const auto estimates = ses_run(x, f.alpha, parse_init(f.init, nullptr));
  const Trajectory trajectory = make_trajectory(std::move(x), {}, estimates);
  if (f.out_path.empty()) {
    out << to_csv(trajectory);
  } else {
    write_results(trajectory, f.out_path, OutputFormat::Csv);
  }
  if (!f.svg_path.empty()) write_results(trajectory, f.svg_path, OutputFormat::Svg);
  return kSuccess;
}

int cmd_simulate(const Flags& f, std::ostream& out) {
  const NoiseModel noise = parse_noise_spec(f.noise);
  const TrendSpec trend = parse_trend_spec(f.trend);
  const InitPolicy init = parse_init(f.init, &trend);
  PathSample path = sample_path(noise, trend, f.steps, f.seed, SimulationOptions{f.burn_in});
  const auto estimates = ses_run(path.observations, f.alpha, init);
  const Trajectory trajectory =
      make_trajectory(std::move(path.observations), std::move(path.trend), estimates);
  if (f.out_path.empty()) {
    out << to_csv(trajectory);
  } else {
    write_results(trajectory, f.out_path, OutputFormat::Csv);
  }
  if (!f.svg_path.empty()) write_text_file(f.svg_path, to_svg(trajectory, describe(noise) + ", " + describe(trend)));
  return kSuccess;
}

int cmd_bound(const Flags& f, std::ostream& out) {
  const NoiseModel noise = parse_noise_spec(f.noise);
  SeriesOptions series;
  series.tolerance = f.tolerance;
  const BoundReport b = tracking_bound(f.alpha, autocovariance_function(noise), f.k, series);
  if (f.json) {
    out << bound_json(b).dump(2) << "\n";
  } else {
    print_bound(out, b);
  }
  return kSuccess;
}

int cmd_optimize(const Flags& f, std::ostream& out) {
  const NoiseModel noise = parse_noise_spec(f.noise);
  AlphaSearchOptions options;
  options.grid_points = f.grid;
  options.tolerance = f.search_tolerance;
  const AlphaOptimum best = optimize_alpha(autocovariance_function(noise), f.k, options);
  if (f.json) {
    out << json{{"alpha", best.alpha}, {"degenerate", best.degenerate}, {"bound", bound_json(best.report)}}
               .dump(2)
        << "\n";
  } else {
    out << "optimal_alpha:    " << text_number(best.alpha) << "\n";
    if (best.degenerate) out << "degenerate:       objective is identically zero\n";
    print_bound(out, best.report);
  }
  return kSuccess;
}

int cmd_mse(const Flags& f, std::ostream& out) {
  const NoiseModel noise = parse_noise_spec(f.noise);
  const TrendSpec trend = parse_trend_spec(f.trend);
  const AutocovFn gamma = autocovariance_function(noise);
  const BoundReport bound = tracking_bound(f.alpha, gamma, trend.lipschitz_k());

  if (f.mode == "exact") {
    if (f.d1 != "zero" && f.d1 != "variance")
      throw SpecError(fmt::format("--d1 expects 'zero' or 'variance', got '{}'", f.d1));
    const MseInit init = f.d1 == "zero" ? MseInit::ZeroD1 : MseInit::Variance;
    const auto d = exact_mse_sequence(f.alpha, gamma, trend, f.steps, init);
    const double last = d.back();
    const double tail = tail_max(std::vector<double>(d.begin() + 1, d.end()), f.tail);
    if (!f.out_path.empty()) write_text_file(f.out_path, exact_mse_to_csv(d));
    if (f.json) {
      out << json{{"mode", "exact"}, {"final_mse", last}, {"tail_max", tail}, {"bound", bound_json(bound)}}
                 .dump(2)
          << "\n";
    } else {
      out << "final_mse:        " << text_number(last) << "\n"
          << "tail_max:         " << text_number(tail) << "\n"
          << "bound_total:      " << text_number(bound.total) << "\n";
    }
    return kSuccess;
  }
  if (f.mode != "mc") throw SpecError(fmt::format("--mode expects 'exact' or 'mc', got '{}'", f.mode));

  ExperimentConfig config;
  config.noise = noise;
  config.trend = trend;
  config.alpha = f.alpha;
  config.horizon = f.steps;
  config.replications = f.reps;
  config.seed = f.seed;
  config.init = parse_init(f.init, &trend);
  config.tail_fraction = f.tail;
  config.burn_in = f.burn_in;
  const MseCurve curve = monte_carlo_mse(config, run_options(f.threads));
  if (!f.out_path.empty()) write_results(curve, f.out_path, OutputFormat::Csv);
  if (!f.svg_path.empty()) write_results(curve, f.svg_path, OutputFormat::Svg);
  if (f.json) {
    out << json{{"mode", "mc"},
                {"tail_mean", curve.tail_mean},
                {"tail_standard_error", curve.tail_standard_error},
                {"tail_max", curve.tail_max},
                {"replications", curve.replications},
                {"bound", bound_json(bound)}}
               .dump(2)
        << "\n";
  } else {
    out << "tail_mean:        " << text_number(curve.tail_mean) << "\n"
        << "tail_std_error:   " << text_number(curve.tail_standard_error) << "\n"
        << "tail_max:         " << text_number(curve.tail_max) << "\n"
        << "bound_total:      " << text_number(bound.total) << "\n";
  }
  return kSuccess;
}

int cmd_verify(const Flags& f, std::ostream& out) {
  ConfigDocument doc = load_config(f.config);
  if (f.verify_reps) doc.experiment.replications = *f.verify_reps;
  const BoundVerification v = verify_bound(doc.experiment, doc.bound_k, run_options(f.threads));
  if (doc.csv_output) write_results(v.curve, *doc.csv_output, OutputFormat::Csv);
  if (doc.svg_output) write_results(v.curve, *doc.svg_output, OutputFormat::Svg);
  if (f.json) {
    out << json{{"pass", v.pass},
                {"empirical_tail", v.empirical_tail},
                {"tail_standard_error", v.tail_standard_error},
                {"bound_total", v.bound_total},
                {"margin", v.margin},
                {"lipschitz_k", v.lipschitz_k},
                {"bound", bound_json(v.bound)}}
               .dump(2)
        << "\n";
  } else {
    out << "result:           " << (v.pass ? "PASS" : "FAIL") << "\n"
        << "empirical_tail:   " << text_number(v.empirical_tail) << "\n"
        << "tail_std_error:   " << text_number(v.tail_standard_error) << "\n"
        << "bound_total:      " << text_number(v.bound_total) << "\n"
        << "margin:           " << text_number(v.margin) << "\n";
  }
  return v.pass ? kSuccess : kBoundViolated;
}

int cmd_reproduce(const Flags& f, std::ostream& out) {
  for (const auto& path : reproduce_figure(f.figure, f.outdir, f.seed)) out << path.string() << "\n";
  return kSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simple exponential smoothing as a trend tracker: simulation, bounds, verification"};
  app.name(args.empty() ? "sestrack" : args.front());
  app.require_subcommand(1);
  app.footer(spec_grammar());

  Flags f;
  auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", f.threads, "Worker threads (default: SESTRACK_THREADS or all cores)");
  };

  auto* smooth = app.add_subcommand("smooth", "Smooth one column of a CSV file");
  smooth->add_option("--input", f.input, "Input CSV file")->required();
  smooth->add_option("--column", f.column, "Column to smooth")->required();
  smooth->add_option("--alpha", f.alpha, "Smoothing parameter in (0, 1)")->required();
  smooth->add_option("--init", f.init, "Initial estimate: first | VALUE")->capture_default_str();
  smooth->add_option("--out", f.out_path, "Output CSV (default: stdout)");
  smooth->add_option("--svg", f.svg_path, "Also write an SVG plot");

  auto* simulate = app.add_subcommand("simulate", "Simulate a trend-stationary path and smooth it");
  simulate->add_option("--trend", f.trend, "Trend spec")->required();
  simulate->add_option("--noise", f.noise, "Noise spec")->required();
  simulate->add_option("--alpha", f.alpha, "Smoothing parameter in (0, 1)")->required();
  simulate->add_option("--steps", f.steps, "Number of observations T")->required();
  simulate->add_option("--seed", f.seed, "Seed")->required();
  simulate->add_option("--init", f.init, "Initial estimate: first | trend | VALUE")->capture_default_str();
  simulate->add_option("--burn-in", f.burn_in, "Noise steps discarded before x_1")->capture_default_str();
  simulate->add_option("--out", f.out_path, "Output CSV (default: stdout)");
  simulate->add_option("--svg", f.svg_path, "Also write an SVG plot");

  auto* bound = app.add_subcommand("bound", "Asymptotic MSE bound and its decomposition");
  bound->add_option("--alpha", f.alpha, "Smoothing parameter in (0, 1)")->required();
  bound->add_option("--k", f.k, "Lipschitz constant of the trend")->required();
  bound->add_option("--noise", f.noise, "Noise spec")->required();
  bound->add_option("--tol", f.tolerance, "Relative truncation tolerance of the covariance series")
      ->capture_default_str();
  bound->add_flag("--json", f.json, "Print JSON");

  auto* optimize = app.add_subcommand("optimize-alpha", "Alpha minimizing the bound");
  optimize->add_option("--k", f.k, "Lipschitz constant of the trend")->required();
  optimize->add_option("--noise", f.noise, "Noise spec")->required();
  optimize->add_option("--tol", f.search_tolerance, "Golden-section tolerance")->capture_default_str();
  optimize->add_option("--grid", f.grid, "Coarse grid size")->capture_default_str();
  optimize->add_flag("--json", f.json, "Print JSON");

  auto* mse = app.add_subcommand("mse", "Exact or Monte Carlo MSE curve");
  mse->add_option("--mode", f.mode, "exact | mc")->capture_default_str();
  mse->add_option("--noise", f.noise, "Noise spec")->capture_default_str();
  mse->add_option("--trend", f.trend, "Trend spec")->capture_default_str();
  mse->add_option("--alpha", f.alpha, "Smoothing parameter in (0, 1)")->capture_default_str();
  mse->add_option("--steps", f.steps, "Horizon T")->capture_default_str();
  mse->add_option("--reps", f.reps, "Replications (mc)")->capture_default_str();
  mse->add_option("--seed", f.seed, "Master seed (mc)")->capture_default_str();
  mse->add_option("--init", f.init, "Initial estimate (mc): first | trend | VALUE")->capture_default_str();
  mse->add_option("--burn-in", f.burn_in, "Noise steps discarded before x_1 (mc)")->capture_default_str();
  mse->add_option("--d1", f.d1, "Initial D_1 (exact): zero | variance")->capture_default_str();
  mse->add_option("--tail", f.tail, "Tail window fraction")->capture_default_str();
  mse->add_option("--out", f.out_path, "Write the curve as CSV");
  mse->add_option("--svg", f.svg_path, "Write the curve as SVG (mc)");
  mse->add_flag("--json", f.json, "Print JSON");
  add_threads(mse);

  auto* verify = app.add_subcommand("verify", "Check the bound against Monte Carlo (exit 3 on violation)");
  verify->add_option("--config", f.config, "JSON experiment config")->required();
  verify->add_option("--reps", f.verify_reps, "Override the replication count");
  verify->add_flag("--json", f.json, "Print JSON");
  add_threads(verify);

  auto* reproduce = app.add_subcommand("reproduce", "Write CSV and SVG for a simulation figure");
  reproduce->add_option("--figure", f.figure, "Figure id: 1a 1b 2a 2b 3a 3b")->required();
  reproduce->add_option("--outdir", f.outdir, "Output directory")->required();
  reproduce->add_option("--seed", f.seed, "Seed")->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("sestrack");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  try {
    if (*smooth) return cmd_smooth(f, out);
    if (*simulate) return cmd_simulate(f, out);
    if (*bound) return cmd_bound(f, out);
    if (*optimize) return cmd_optimize(f, out);
    if (*mse) return cmd_mse(f, out);
    if (*verify) return cmd_verify(f, out);
    if (*reproduce) return cmd_reproduce(f, out);
  } catch (const SpecError& e) {
    err << "error: " << e.what() << "\n" << spec_grammar();
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  }
  return kUsageError;
}

}  // namespace sestrack::cli
