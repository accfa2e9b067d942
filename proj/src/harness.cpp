#include "sestrack/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sestrack/io_data.hpp"
#include "sestrack/overloaded.hpp"
#include "sestrack/rng.hpp"

namespace sestrack {

void validate(const ExperimentConfig& config) {
  validate(config.noise);
  validate_alpha(config.alpha);
  if (config.horizon < 2) throw std::invalid_argument("horizon must be >= 2");
  if (config.replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (!(config.tail_fraction > 0.0 && config.tail_fraction <= 1.0)) {
    throw std::invalid_argument(
        fmt::format("tail fraction must lie in (0, 1], got {}", config.tail_fraction));
  }
  if (config.burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
  if (auto n = config.trend.length(); n && *n < config.horizon) {
    throw std::invalid_argument(
        fmt::format("table trend has {} values but horizon is {}", *n, config.horizon));
  }
  if (const auto* fixed = std::get_if<FixedInit>(&config.init); fixed && !std::isfinite(fixed->value))
    throw std::invalid_argument("fixed initial estimate must be finite");
}

unsigned default_worker_count() {
  if (const char* env = std::getenv("SESTRACK_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<unsigned>(value);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

namespace {

// Squared pairing errors (m_hat_{t+1} - m*_t)^2 for t = 1..T of one replication.
void replication_errors(const ExperimentConfig& config, std::int64_t index, double* out) {
  const SimulationOptions sim{config.burn_in};
  const PathSample path = sample_path(config.noise, config.trend, config.horizon,
                                      child_seed(config.seed, static_cast<std::uint64_t>(index)), sim);
  const std::vector<double> estimates = ses_run(path.observations, config.alpha, config.init);
  for (std::size_t t = 0; t < path.trend.size(); ++t) {
    const double e = estimates[t + 1] - path.trend[t];
    out[t] = e * e;
  }
}

// Welford accumulator over replications for one scalar.
struct Moments {
  double mean = 0.0;
  double m2 = 0.0;
  void add(double x, std::int64_t n) {
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  double standard_error(std::int64_t n) const {
    if (n < 2) return 0.0;
    const auto nd = static_cast<double>(n);
    return std::sqrt(m2 / (nd - 1.0) / nd);
  }
};

}  // namespace

MseCurve monte_carlo_mse(const ExperimentConfig& config, const RunOptions& options) {
  validate(config);
  const auto horizon = static_cast<std::size_t>(config.horizon);
  const auto reps = config.replications;
  if (static_cast<double>(config.horizon) * static_cast<double>(reps) >
      static_cast<double>(options.max_cells)) {
    throw ResourceLimitError(fmt::format("horizon * replications = {} exceeds the limit of {}",
                                         static_cast<double>(config.horizon) * reps,
                                         options.max_cells));
  }
  const unsigned workers = options.workers == 0 ? default_worker_count() : options.workers;

  const std::size_t window = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(config.tail_fraction * static_cast<double>(horizon))), 1,
      horizon);

  std::vector<Moments> per_step(horizon);
  Moments tail;

  const std::int64_t chunk = std::max<std::int64_t>(256, 32 * static_cast<std::int64_t>(workers));
  std::vector<double> buffer(static_cast<std::size_t>(std::min(chunk, reps)) * horizon);

  for (std::int64_t start = 0; start < reps; start += chunk) {
    const std::int64_t count = std::min(chunk, reps - start);
    auto work = [&](unsigned worker) {
      for (std::int64_t i = worker; i < count; i += workers)
        replication_errors(config, start + i, buffer.data() + static_cast<std::size_t>(i) * horizon);
    };
    if (workers == 1 || count == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }

    for (std::int64_t i = 0; i < count; ++i) {
      const double* row = buffer.data() + static_cast<std::size_t>(i) * horizon;
      const std::int64_t n = start + i + 1;
      for (std::size_t t = 0; t < horizon; ++t) per_step[t].add(row[t], n);
      double window_sum = 0.0;
      for (std::size_t t = horizon - window; t < horizon; ++t) window_sum += row[t];
      tail.add(window_sum / static_cast<double>(window), n);
    }
  }

  MseCurve curve;
  curve.replications = reps;
  curve.tail_window = static_cast<std::int64_t>(window);
  curve.mse.resize(horizon);
  curve.standard_error.resize(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    curve.mse[t] = per_step[t].mean;
    curve.standard_error[t] = per_step[t].standard_error(reps);
  }
  double sum = 0.0;
  curve.tail_max = curve.mse[horizon - window];
  for (std::size_t t = horizon - window; t < horizon; ++t) {
    sum += curve.mse[t];
    curve.tail_max = std::max(curve.tail_max, curve.mse[t]);
  }
  curve.tail_mean = sum / static_cast<double>(window);
  curve.tail_standard_error = tail.standard_error(reps);
  return curve;
}

BoundVerification verify_bound(const ExperimentConfig& config,
                               std::optional<double> lipschitz_override,
                               const RunOptions& options) {
  BoundVerification out;
  out.lipschitz_k = lipschitz_override.value_or(config.trend.lipschitz_k());
  out.bound = tracking_bound(config.alpha, autocovariance_function(config.noise), out.lipschitz_k);
  out.curve = monte_carlo_mse(config, options);
  out.empirical_tail = out.curve.tail_mean;
  out.tail_standard_error = out.curve.tail_standard_error;
  out.bound_total = out.bound.total;
  out.margin = out.bound_total + 3.0 * out.tail_standard_error - out.empirical_tail;
  out.pass = out.margin >= 0.0;
  return out;
}

std::vector<std::string> figure_ids() { return {"1a", "1b", "2a", "2b", "3a", "3b"}; }

ExperimentConfig figure_config(std::string_view id, std::uint64_t seed) {
  const TrendSpec ramp = LinearTrend{2.0, 0.1};
  const TrendSpec wave = SinusoidTrend{1.0, std::numbers::pi / 1000.0, 0.0};
  const TrendSpec slow_ramp = LinearTrend{0.1, 0.01};

  ExperimentConfig config;
  config.alpha = 0.1;
  config.horizon = 1000;
  config.replications = 1;
  config.seed = seed;
  config.init = FixedInit{8.0};
  if (id == "1a") {
    config.trend = ramp;
    config.noise = MA1{2.0, 1.0};
  } else if (id == "1b") {
    config.trend = wave;
    config.noise = MA1{2.0, 1.0};
  } else if (id == "2a") {
    config.trend = ramp;
    config.noise = MA1{-0.4, 1.0};
  } else if (id == "2b") {
    config.trend = wave;
    config.noise = MA1{-0.4, 1.0};
  } else if (id == "3a") {
    config.trend = slow_ramp;
    config.noise = AR1{0.2, 1.0};
  } else if (id == "3b") {
    config.trend = wave;
    config.noise = AR1{0.2, 1.0};
  } else {
    throw std::invalid_argument(
        fmt::format("unknown figure id '{}'; valid ids: {}", id, fmt::join(figure_ids(), ", ")));
  }
  return config;
}

std::vector<std::filesystem::path> reproduce_figure(std::string_view id,
                                                    const std::filesystem::path& outdir,
                                                    std::uint64_t seed) {
  const ExperimentConfig config = figure_config(id, seed);
  PathSample path = sample_path(config.noise, config.trend, config.horizon,
                                child_seed(config.seed, 0));
  const std::vector<double> estimates = ses_run(path.observations, config.alpha, config.init);
  const Trajectory trajectory =
      make_trajectory(std::move(path.observations), std::move(path.trend), estimates);

  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) {
    throw std::runtime_error(
        fmt::format("cannot create output directory {}: {}", outdir.string(), ec.message()));
  }
  const std::string stem = fmt::format("fig{}", id);
  const std::string title = fmt::format("Figure {}: {}, {}, alpha = {}", id,
                                        describe(config.noise), describe(config.trend), config.alpha);
  write_results(trajectory, outdir / (stem + ".csv"), OutputFormat::Csv);
  write_text_file(outdir / (stem + ".svg"), to_svg(trajectory, title));
  return {outdir / (stem + ".csv"), outdir / (stem + ".svg")};
}

SignComparison compare_negative_vs_positive_ma(double alpha, double magnitude,
                                               std::int64_t replications, std::int64_t horizon,
                                               std::uint64_t seed, const RunOptions& options) {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
    throw std::invalid_argument("MA coefficient magnitude must be finite and >= 0");
  }
  ExperimentConfig config;
  config.alpha = alpha;
  config.horizon = horizon;
  config.replications = replications;
  config.seed = seed;
  config.trend = ConstantTrend{0.0};
  config.init = FixedInit{0.0};

  SignComparison out;
  config.noise = MA1{magnitude, 1.0};
  const MseCurve positive = monte_carlo_mse(config, options);
  out.tail_positive = positive.tail_mean;
  out.standard_error_positive = positive.tail_standard_error;
  out.bound_positive = tracking_bound(alpha, autocovariance_function(config.noise), 0.0).total;

  config.noise = MA1{-magnitude, 1.0};
  const MseCurve negative = monte_carlo_mse(config, options);
  out.tail_negative = negative.tail_mean;
  out.standard_error_negative = negative.tail_standard_error;
  out.bound_negative = tracking_bound(alpha, autocovariance_function(config.noise), 0.0).total;
  return out;
}

}  // namespace sestrack
