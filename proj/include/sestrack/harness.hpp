#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sestrack/process_model.hpp"
#include "sestrack/smoother.hpp"
#include "sestrack/theory.hpp"

namespace sestrack {

inline constexpr std::uint64_t kDefaultSeed = 20240917;

struct ExperimentConfig {
  NoiseModel noise = WhiteGaussian{1.0};
  TrendSpec trend = ConstantTrend{0.0};
  double alpha = 0.1;
  std::int64_t horizon = 1000;
  std::int64_t replications = 10000;
  std::uint64_t seed = kDefaultSeed;
  InitPolicy init = FirstObservation{};
  double tail_fraction = 0.1;
  std::int64_t burn_in = 0;
};

/// Throws std::invalid_argument on R < 1, T < 2, alpha outside (0, 1),
/// tail fraction outside (0, 1], or an invalid noise model.
void validate(const ExperimentConfig& config);

class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  /// 0 selects default_worker_count().
  unsigned workers = 0;
  /// Upper limit on horizon * replications.
  std::uint64_t max_cells = 4'000'000'000ULL;
};

/// SESTRACK_THREADS if set to a positive integer, else the hardware
/// concurrency (at least 1).
unsigned default_worker_count();

/// Per-step Monte Carlo estimate of E[(m_hat_{t+1} - m*_t)^2], t = 1..T.
struct MseCurve {
  std::vector<double> mse;
  std::vector<double> standard_error;
  /// Mean of mse over the final tail window.
  double tail_mean = 0.0;
  double tail_max = 0.0;
  /// Standard error of tail_mean, from per-replication window averages.
  double tail_standard_error = 0.0;
  std::int64_t tail_window = 0;
  std::int64_t replications = 0;
};

/// Replication r uses seed child_seed(config.seed, r). Replications run in
/// parallel but are accumulated in index order, so the result does not
/// depend on the worker count.
MseCurve monte_carlo_mse(const ExperimentConfig& config, const RunOptions& options = {});

struct BoundVerification {
  bool pass = false;
  double empirical_tail = 0.0;
  double tail_standard_error = 0.0;
  double bound_total = 0.0;
  /// bound_total + 3 * tail_standard_error - empirical_tail; pass iff >= 0.
  double margin = 0.0;
  double lipschitz_k = 0.0;
  BoundReport bound;
  MseCurve curve;
};

/// Compares the Monte Carlo tail estimate with the tracking bound. The bound
/// uses the trend's certified K unless `lipschitz_override` is given.
BoundVerification verify_bound(const ExperimentConfig& config,
                               std::optional<double> lipschitz_override = std::nullopt,
                               const RunOptions& options = {});

/// Figures "1a", "1b", "2a", "2b", "3a", "3b": T = 1000, alpha = 0.1, m_hat_1 = 8,
/// one replication.
std::vector<std::string> figure_ids();
ExperimentConfig figure_config(std::string_view id, std::uint64_t seed = kDefaultSeed);

/// Writes <outdir>/fig<id>.csv and <outdir>/fig<id>.svg and returns both paths.
std::vector<std::filesystem::path> reproduce_figure(std::string_view id,
                                                    const std::filesystem::path& outdir,
                                                    std::uint64_t seed = kDefaultSeed);

struct SignComparison {
  double tail_positive = 0.0;
  double tail_negative = 0.0;
  double standard_error_positive = 0.0;
  double standard_error_negative = 0.0;
  double bound_positive = 0.0;
  double bound_negative = 0.0;
};

/// MA(1) noise with coefficient +|a| and -|a| on a constant trend, same
/// seed for both arms, m_hat_1 fixed at the trend level.
SignComparison compare_negative_vs_positive_ma(double alpha, double magnitude,
                                               std::int64_t replications, std::int64_t horizon,
                                               std::uint64_t seed, const RunOptions& options = {});

}  // namespace sestrack
