#include "sestrack/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "sestrack/smoother.hpp"

namespace sestrack {

TailSum truncated_tail_sum(const AutocovFn& gamma, double beta, const SeriesOptions& options) {
  if (!gamma.summable()) {
    throw std::invalid_argument("autocovariance is not summable and has no closed form");
  }
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("series tolerance must be > 0");
  const double gamma0 = gamma.variance();
  const double threshold = options.tolerance * gamma0;
  TailSum out;
  double power = 1.0;
  std::int64_t k = 1;
  for (; k <= options.max_lag; ++k) {
    power *= beta;
    const double term = gamma(k) * power;
    out.value += term;
    if (std::abs(term) <= threshold) break;
  }
  out.last_lag = std::min(k, options.max_lag);
  // |gamma(j)| <= gamma(0) for every j, so the omitted tail is at most a
  // geometric series starting at lag last_lag + 1.
  out.residual_bound =
      gamma0 * std::pow(beta, static_cast<double>(out.last_lag + 1)) / (1.0 - beta);
  return out;
}

BoundReport tracking_bound(double alpha, const AutocovFn& gamma, double lipschitz_k,
                           const SeriesOptions& options) {
  validate_alpha(alpha);
  if (!(lipschitz_k >= 0.0) || !std::isfinite(lipschitz_k)) {
    throw std::invalid_argument(fmt::format("Lipschitz constant must be >= 0, got {}", lipschitz_k));
  }
  const double beta = 1.0 - alpha;
  const double weight = alpha / (2.0 - alpha);

  BoundReport report;
  report.alpha = alpha;
  report.variance_term = weight * gamma.variance();

  double tail = 0.0;
  if (options.method == SeriesMethod::Auto && gamma.has_closed_form_tail()) {
    tail = *gamma.closed_form_tail(beta);
    report.closed_form = true;
  } else {
    const TailSum sum = truncated_tail_sum(gamma, beta, options);
    tail = sum.value;
    report.truncation_lag = sum.last_lag;
    report.truncation_residual_bound = 2.0 * weight * sum.residual_bound;
  }
  report.correlation_term = 2.0 * weight * tail;

  const double lag_error = beta / alpha * lipschitz_k;
  report.trend_term = lag_error * lag_error;
  report.total = report.variance_term + report.correlation_term + report.trend_term;
  return report;
}

MseRecursion::MseRecursion(double alpha, AutocovFn gamma, TrendSpec trend, MseInit init)
    : alpha_(alpha),
      beta_(1.0 - alpha),
      gamma_(std::move(gamma)),
      trend_(std::move(trend)),
      autocov_partial_sum_(0.0),
      beta_power_(1.0) {
  validate_alpha(alpha);
  state_.t = 1;
  state_.mse = init == MseInit::Variance ? gamma_.variance() : 0.0;
  state_.mean_error = 0.0;
  state_.scaled_trend_sum = 0.0;  // K_1 = 0 under m*_0 := m*_1
  autocov_partial_sum_ = gamma_.variance();
}

const MseRecursionState& MseRecursion::advance() {
  const std::int64_t t = state_.t;
  const double k_t =
      t == 1 ? 0.0 : trend_value(trend_, t) - trend_value(trend_, t - 1);
  const double a2 = alpha_ * alpha_;
  const double b2 = beta_ * beta_;

  const double next_mse =
      b2 * (state_.mse + k_t * k_t - 2.0 * k_t * state_.mean_error) +
      2.0 * a2 * autocov_partial_sum_ - a2 * gamma_.variance();
  const double next_mean = beta_ * state_.mean_error - beta_ * k_t;

  // S_{t+1} = S_t + beta^t gamma(t)
  beta_power_ *= beta_;
  autocov_partial_sum_ += beta_power_ * gamma_(t);

  const auto length = trend_.length();
  if (!length || t + 1 <= *length) {
    const double k_next = trend_value(trend_, t + 1) - trend_value(trend_, t);
    state_.scaled_trend_sum = beta_ * state_.scaled_trend_sum + k_next;
  } else {
    state_.scaled_trend_sum = std::numeric_limits<double>::quiet_NaN();
  }
  state_.mse = next_mse;
  state_.mean_error = next_mean;
  state_.t = t + 1;
  return state_;
}

std::vector<double> exact_mse_sequence(double alpha, const AutocovFn& gamma, const TrendSpec& trend,
                                       std::int64_t horizon, MseInit init) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (auto n = trend.length(); n && *n < horizon) {
    throw std::out_of_range(
        fmt::format("table trend of length {} cannot cover horizon {}", *n, horizon));
  }
  MseRecursion recursion(alpha, gamma, trend, init);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(horizon) + 1);
  out.push_back(recursion.state().mse);
  for (std::int64_t t = 1; t <= horizon; ++t) out.push_back(recursion.advance().mse);
  return out;
}

double closed_form_mse(double alpha, const AutocovFn& gamma, const TrendSpec& trend,
                       std::int64_t t) {
  validate_alpha(alpha);
  if (t < 1) throw std::out_of_range("closed_form_mse: t must be >= 1");
  if (t == 1) return 0.0;
  const double beta = 1.0 - alpha;
  const double one_minus_b2 = alpha * (2.0 - alpha);
  const double a2 = alpha * alpha;

  // (sum_{h=1}^{t-1} beta^{t-h} K_h)^2, K_1 = 0
  double lag = 0.0;
  for (std::int64_t h = 2; h <= t - 1; ++h) {
    const double k_h = trend_value(trend, h) - trend_value(trend, h - 1);
    lag += std::pow(beta, static_cast<double>(t - h)) * k_h;
  }
  const double trend_part = lag * lag;

  double correlation_part = 0.0;
  for (std::int64_t k = 0; k <= t - 2; ++k) {
    const double g = gamma(k);
    if (g == 0.0) continue;
    const double n = static_cast<double>(t - 1 - k);
    correlation_part +=
        g * std::pow(beta, static_cast<double>(k)) * (1.0 - std::pow(beta, 2.0 * n)) / one_minus_b2;
  }

  const double variance_part =
      gamma.variance() * (1.0 - std::pow(beta, 2.0 * static_cast<double>(t - 1))) / one_minus_b2;

  return trend_part + 2.0 * a2 * correlation_part - a2 * variance_part;
}

namespace {

struct Sample {
  double alpha;
  double value;
};

// Smaller value wins; equal values go to the smaller alpha.
bool better(const Sample& a, const Sample& b) {
  if (a.value != b.value) return a.value < b.value;
  return a.alpha < b.alpha;
}

}  // namespace

AlphaOptimum optimize_alpha(const AutocovFn& gamma, double lipschitz_k,
                            const AlphaSearchOptions& options) {
  if (options.grid_points < 2) throw std::invalid_argument("alpha grid needs >= 2 points");
  if (!(lipschitz_k >= 0.0)) throw std::invalid_argument("Lipschitz constant must be >= 0");

  const int n = options.grid_points;
  auto objective = [&](double a) {
    return tracking_bound(a, gamma, lipschitz_k, options.series).total;
  };
  auto grid_alpha = [n](int i) { return static_cast<double>(i) / static_cast<double>(n + 1); };

  Sample best{grid_alpha(1), objective(grid_alpha(1))};
  int best_index = 1;
  bool all_zero = best.value == 0.0;
  for (int i = 2; i <= n; ++i) {
    const Sample s{grid_alpha(i), objective(grid_alpha(i))};
    all_zero = all_zero && s.value == 0.0;
    if (better(s, best)) {
      best = s;
      best_index = i;
    }
  }

  AlphaOptimum result;
  if (all_zero) {
    result.alpha = best.alpha;
    result.report = tracking_bound(best.alpha, gamma, lipschitz_k, options.series);
    result.degenerate = true;
    return result;
  }

  double lo = grid_alpha(std::max(best_index - 1, 1));
  double hi = grid_alpha(std::min(best_index + 1, n));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = objective(c);
  double fd = objective(d);
  while (hi - lo > options.tolerance) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = objective(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = objective(d);
    }
  }
  const double mid = 0.5 * (lo + hi);
  const Sample refined{mid, objective(mid)};
  if (better(refined, best)) best = refined;

  result.alpha = best.alpha;
  result.report = tracking_bound(best.alpha, gamma, lipschitz_k, options.series);
  return result;
}

double tail_max(const std::vector<double>& mse, double fraction) {
  if (mse.empty()) throw std::invalid_argument("tail_max: empty sequence");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must be in (0, 1]");
  const auto n = mse.size();
  auto window = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  window = std::clamp<std::size_t>(window, 1, n);
  return *std::max_element(mse.end() - static_cast<std::ptrdiff_t>(window), mse.end());
}

}  // namespace sestrack
