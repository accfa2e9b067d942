#pragma once

#include <cstdint>
#include <vector>

#include "sestrack/process_model.hpp"

namespace sestrack {

/// Asymptotic tracking bound on E[(m_hat_{t+1} - m*_t)^2], split by source:
///
///   variance_term    = alpha / (2 - alpha) * gamma(0)
///   correlation_term = 2 alpha / (2 - alpha) * sum_{k>=1} gamma(k) beta^k
///   trend_term       = beta^2 / alpha^2 * K^2
struct BoundReport {
  double alpha = 0.0;
  double variance_term = 0.0;
  double correlation_term = 0.0;
  double trend_term = 0.0;
  double total = 0.0;
  /// Last lag included in a truncated series; 0 when a closed form was used.
  std::int64_t truncation_lag = 0;
  /// Upper bound on |sum of omitted terms| of the correlation series.
  double truncation_residual_bound = 0.0;
  bool closed_form = false;
};

enum class SeriesMethod {
  Auto,       // closed form when the autocovariance carries one
  Truncated,  // always sum the series
};

struct SeriesOptions {
  double tolerance = 1e-14;
  std::int64_t max_lag = 1'000'000;
  SeriesMethod method = SeriesMethod::Auto;
};

struct TailSum {
  double value = 0.0;
  std::int64_t last_lag = 0;
  double residual_bound = 0.0;
};

/// sum_{k>=1} gamma(k) beta^k, stopping after the first lag with
/// |gamma(k)| beta^k <= tolerance * gamma(0) or at max_lag.
TailSum truncated_tail_sum(const AutocovFn& gamma, double beta, const SeriesOptions& options = {});

/// Throws std::invalid_argument for alpha outside (0, 1), negative K, or a
/// non-summable autocovariance without a closed form.
BoundReport tracking_bound(double alpha, const AutocovFn& gamma, double lipschitz_k,
                           const SeriesOptions& options = {});

enum class MseInit {
  ZeroD1,    // D_1 = 0: deterministic m_hat_1 = m*_1
  Variance,  // D_1 = gamma(0): m_hat_1 = X_1
};

/// State of the exact first/second moment recursions at step t.
///
/// `scaled_trend_sum` holds beta^t c_t = sum_{h<=t} beta^{t-h} K_h rather than
/// c_t itself, which overflows once beta^{-t} leaves double range. It is
/// NaN once t runs past the end of a table trend.
struct MseRecursionState {
  std::int64_t t = 1;
  double mse = 0.0;         // D_t
  double mean_error = 0.0;  // v_t
  double scaled_trend_sum = 0.0;
};

/// Evolves
///
///   v_{t+1} = beta v_t - beta K_t,                 v_1 = 0
///   D_{t+1} = beta^2 (D_t + K_t^2 - 2 K_t v_t) + 2 alpha^2 S_t - alpha^2 gamma(0)
///
/// with K_t = m*_t - m*_{t-1} (m*_0 := m*_1) and S_t = sum_{k<t} beta^k gamma(k)
/// maintained incrementally. The recursion is exact when m_hat_1 is
/// deterministic; with m_hat_1 = X_1 it is exact only for uncorrelated noise,
/// since it omits the covariance of m_hat_1 with later observations.
class MseRecursion {
 public:
  MseRecursion(double alpha, AutocovFn gamma, TrendSpec trend, MseInit init = MseInit::ZeroD1);

  const MseRecursionState& state() const noexcept { return state_; }
  /// Moves from step t to t + 1 and returns the new state.
  const MseRecursionState& advance();

 private:
  double alpha_;
  double beta_;
  AutocovFn gamma_;
  TrendSpec trend_;
  MseRecursionState state_;
  double autocov_partial_sum_;  // S_t
  double beta_power_;           // beta^{t-1}
};

/// D_1 .. D_{T+1}.
std::vector<double> exact_mse_sequence(double alpha, const AutocovFn& gamma, const TrendSpec& trend,
                                       std::int64_t horizon, MseInit init = MseInit::ZeroD1);

/// Non-recursive evaluation of D_t for the D_1 = 0 recursion:
///
///   D_t = (sum_{h<t} beta^{t-h} K_h)^2
///         + 2 alpha^2 sum_{k=0}^{t-2} gamma(k) sum_{i=0}^{t-2-k} beta^{2i+k}
///         - alpha^2 gamma(0) sum_{i=0}^{t-2} beta^{2i}
///
/// Inner geometric sums use their closed forms, so the cost is O(t).
double closed_form_mse(double alpha, const AutocovFn& gamma, const TrendSpec& trend, std::int64_t t);

struct AlphaOptimum {
  double alpha = 0.0;
  BoundReport report;
  /// Objective is identically zero (no noise, constant trend).
  bool degenerate = false;
};

struct AlphaSearchOptions {
  int grid_points = 1024;
  double tolerance = 1e-10;
  SeriesOptions series;
};

/// Minimizes BoundReport::total over alpha: scan the grid alpha_i = i/(n+1),
/// then golden-section search between the neighbours of the best grid point.
/// Ties go to the smaller alpha.
AlphaOptimum optimize_alpha(const AutocovFn& gamma, double lipschitz_k,
                            const AlphaSearchOptions& options = {});

/// Maximum of D_t over the last `fraction` of the first `horizon` steps.
double tail_max(const std::vector<double>& mse, double fraction);

}  // namespace sestrack
