#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace sestrack {

/// Autocovariance function of a weakly stationary noise sequence.
///
/// Evaluation is always at |k|, so evenness holds by construction. A closed
/// form of the weighted tail sum  sum_{k>=1} gamma(k) * beta^k  may be
/// attached; the theory module uses it instead of truncating the series.
class AutocovFn {
 public:
  using Eval = std::function<double(std::int64_t)>;
  using TailSum = std::function<double(double beta)>;

  AutocovFn(Eval eval, bool summable, TailSum closed_form_tail = {});

  double operator()(std::int64_t lag) const;
  double variance() const { return (*this)(0); }
  bool summable() const noexcept { return summable_; }
  bool has_closed_form_tail() const noexcept { return static_cast<bool>(tail_); }
  /// sum_{k>=1} gamma(k) beta^k, only when a closed form is attached.
  std::optional<double> closed_form_tail(double beta) const;

 private:
  Eval eval_;
  bool summable_;
  TailSum tail_;
};

struct WhiteGaussian {
  double variance = 1.0;
};

/// eps_t = (eta_t + a * eta_{t-1}) / sqrt(1 + a^2); gamma(0) equals the
/// innovation variance.
struct MA1 {
  double a = 0.0;
  double variance = 1.0;
};

/// eps_{t+1} = theta * eps_t + eta_t with 0 < theta < 1.
struct AR1 {
  double theta = 0.5;
  double variance = 1.0;
};

/// eps_t = eta_t + b_1 eta_{t-1} + ... + b_q eta_{t-q}. Not normalized:
/// gamma(0) = variance * (1 + sum b_j^2).
struct MAq {
  std::vector<double> coefficients;
  double variance = 1.0;
};

using NoiseModel = std::variant<WhiteGaussian, MA1, AR1, MAq>;

/// Throws std::invalid_argument when parameters are outside the model's
/// domain. White noise accepts variance 0 (the noiseless process); the
/// other variants need a strictly positive innovation variance.
void validate(const NoiseModel& noise);

std::string describe(const NoiseModel& noise);

double autocovariance(const NoiseModel& noise, std::int64_t lag);
AutocovFn autocovariance_function(const NoiseModel& noise);

struct ConstantTrend {
  double level = 0.0;
};

/// m*_t = start + slope * (t - 1).
struct LinearTrend {
  double start = 0.0;
  double slope = 0.0;
};

/// m*_t = amplitude * sin(rate * (t - 1) + phase).
struct SinusoidTrend {
  double amplitude = 1.0;
  double rate = 0.0;
  double phase = 0.0;
};

/// m*_t = values[t - 1].
struct TableTrend {
  std::vector<double> values;
};

/// Deterministic trend with a certified Lipschitz constant K bounding
/// |m*_{t+1} - m*_t|. Step indices start at 1; a formula written for time
/// index s = 0, 1, ... is evaluated at s = t - 1.
class TrendSpec {
 public:
  using Variant = std::variant<ConstantTrend, LinearTrend, SinusoidTrend, TableTrend>;

  TrendSpec(Variant shape);  // NOLINT(google-explicit-constructor)
  template <class Shape>
    requires std::is_constructible_v<Variant, Shape>
  TrendSpec(Shape shape)  // NOLINT(google-explicit-constructor)
      : TrendSpec(Variant(std::move(shape))) {}

  const Variant& shape() const noexcept { return shape_; }
  double lipschitz_k() const noexcept { return lipschitz_k_; }
  /// Number of defined steps; nullopt for unbounded formulas.
  std::optional<std::int64_t> length() const;

 private:
  Variant shape_;
  double lipschitz_k_;
};

std::string describe(const TrendSpec& trend);

/// m*_t for t >= 1. Throws std::out_of_range for t < 1 or past the end
/// of a table.
double trend_value(const TrendSpec& trend, std::int64_t t);

struct SimulationOptions {
  /// Noise steps generated and discarded before x_1. The stationary start
  /// already makes eps_1 exact, so this only changes the stream position.
  std::int64_t burn_in = 0;
};

struct PathSample {
  std::vector<double> observations;  // x_1..x_T
  std::vector<double> trend;         // m*_1..m*_T
  std::uint64_t seed = 0;
  std::string noise_description;
  std::string trend_description;
};

/// Noise sequence eps_1..eps_T started from its stationary law.
std::vector<double> sample_noise(const NoiseModel& noise, std::int64_t horizon,
                                 std::uint64_t seed, const SimulationOptions& options = {});

/// X_t = m*_t + eps_t, deterministic in (noise, trend, horizon, seed).
PathSample sample_path(const NoiseModel& noise, const TrendSpec& trend,
                       std::int64_t horizon, std::uint64_t seed,
                       const SimulationOptions& options = {});

/// Biased sample autocovariance (1/n normalization) of a zero-mean series.
double sample_autocovariance(const std::vector<double>& series, std::int64_t lag);

}  // namespace sestrack
