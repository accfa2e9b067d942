#include "sestrack/process_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sestrack/overloaded.hpp"
#include "sestrack/rng.hpp"

namespace sestrack {

AutocovFn::AutocovFn(Eval eval, bool summable, TailSum closed_form_tail)
    : eval_(std::move(eval)), summable_(summable), tail_(std::move(closed_form_tail)) {
  if (!eval_) throw std::invalid_argument("AutocovFn: empty evaluation rule");
}

double AutocovFn::operator()(std::int64_t lag) const {
  return eval_(lag < 0 ? -lag : lag);
}

std::optional<double> AutocovFn::closed_form_tail(double beta) const {
  if (!tail_) return std::nullopt;
  return tail_(beta);
}

namespace {

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw std::invalid_argument(fmt::format("{} must be finite", what));
}

void require_positive_variance(double variance, const char* model) {
  require_finite(variance, "noise variance");
  if (variance <= 0.0) {
    throw std::invalid_argument(fmt::format("{}: innovation variance must be > 0, got {}", model,
                                            variance));
  }
}

// Full coefficient vector (1, b_1, ..., b_q) of an MA(q) model.
std::vector<double> ma_weights(const MAq& m) {
  std::vector<double> w;
  w.reserve(m.coefficients.size() + 1);
  w.push_back(1.0);
  w.insert(w.end(), m.coefficients.begin(), m.coefficients.end());
  return w;
}

double maq_autocov(const std::vector<double>& w, double variance, std::int64_t lag) {
  const auto q = static_cast<std::int64_t>(w.size()) - 1;
  if (lag > q) return 0.0;
  double acc = 0.0;
  for (std::int64_t j = 0; j + lag <= q; ++j) acc += w[j] * w[j + lag];
  return variance * acc;
}

}  // namespace

void validate(const NoiseModel& noise) {
  std::visit(overloaded{
                 [](const WhiteGaussian& m) {
                   require_finite(m.variance, "noise variance");
                   if (m.variance < 0.0)
                     throw std::invalid_argument("white: variance must be >= 0");
                 },
                 [](const MA1& m) {
                   require_finite(m.a, "ma1 coefficient");
                   require_positive_variance(m.variance, "ma1");
                 },
                 [](const AR1& m) {
                   require_finite(m.theta, "ar1 coefficient");
                   if (!(m.theta > 0.0 && m.theta < 1.0)) {
                     throw std::invalid_argument(
                         fmt::format("ar1: theta must lie in (0, 1), got {}", m.theta));
                   }
                   require_positive_variance(m.variance, "ar1");
                 },
                 [](const MAq& m) {
                   for (double b : m.coefficients) require_finite(b, "maq coefficient");
                   require_positive_variance(m.variance, "maq");
                 },
             },
             noise);
}

std::string describe(const NoiseModel& noise) {
  return std::visit(
      overloaded{
          [](const WhiteGaussian& m) { return fmt::format("white(var={})", m.variance); },
          [](const MA1& m) { return fmt::format("ma1(a={}, var={})", m.a, m.variance); },
          [](const AR1& m) { return fmt::format("ar1(theta={}, var={})", m.theta, m.variance); },
          [](const MAq& m) {
            return fmt::format("maq(b=[{}], var={})", fmt::join(m.coefficients, ", "), m.variance);
          },
      },
      noise);
}

double autocovariance(const NoiseModel& noise, std::int64_t lag) {
  const std::int64_t k = lag < 0 ? -lag : lag;
  return std::visit(overloaded{
                        [k](const WhiteGaussian& m) { return k == 0 ? m.variance : 0.0; },
                        [k](const MA1& m) {
                          if (k == 0) return m.variance;
                          if (k == 1) return m.variance * m.a / (1.0 + m.a * m.a);
                          return 0.0;
                        },
                        [k](const AR1& m) {
                          const double gamma0 = m.variance / (1.0 - m.theta * m.theta);
                          return gamma0 * std::pow(m.theta, static_cast<double>(k));
                        },
                        [k](const MAq& m) { return maq_autocov(ma_weights(m), m.variance, k); },
                    },
                    noise);
}

AutocovFn autocovariance_function(const NoiseModel& noise) {
  validate(noise);
  return std::visit(
      overloaded{
          [](const WhiteGaussian& m) {
            return AutocovFn([v = m.variance](std::int64_t k) { return k == 0 ? v : 0.0; }, true,
                             [](double) { return 0.0; });
          },
          [&noise](const MA1&) {
            const double gamma1 = autocovariance(noise, 1);
            return AutocovFn([n = noise](std::int64_t k) { return autocovariance(n, k); }, true,
                             [gamma1](double beta) { return gamma1 * beta; });
          },
          [](const AR1& m) {
            const double gamma0 = m.variance / (1.0 - m.theta * m.theta);
            return AutocovFn(
                [gamma0, theta = m.theta](std::int64_t k) {
                  return gamma0 * std::pow(theta, static_cast<double>(k));
                },
                true,
                [gamma0, theta = m.theta](double beta) {
                  return gamma0 * theta * beta / (1.0 - theta * beta);
                });
          },
          [](const MAq& m) {
            auto w = ma_weights(m);
            const double variance = m.variance;
            const auto q = static_cast<std::int64_t>(w.size()) - 1;
            return AutocovFn(
                [w, variance](std::int64_t k) { return maq_autocov(w, variance, k); }, true,
                [w, variance, q](double beta) {
                  double acc = 0.0;
                  double power = 1.0;
                  for (std::int64_t k = 1; k <= q; ++k) {
                    power *= beta;
                    acc += maq_autocov(w, variance, k) * power;
                  }
                  return acc;
                });
          },
      },
      noise);
}

namespace {

double lipschitz_of(const TrendSpec::Variant& shape) {
  return std::visit(overloaded{
                        [](const ConstantTrend&) { return 0.0; },
                        [](const LinearTrend& t) { return std::abs(t.slope); },
                        [](const SinusoidTrend& t) { return std::abs(t.amplitude * t.rate); },
                        [](const TableTrend& t) {
                          double k = 0.0;
                          for (std::size_t i = 1; i < t.values.size(); ++i)
                            k = std::max(k, std::abs(t.values[i] - t.values[i - 1]));
                          return k;
                        },
                    },
                    shape);
}

void validate_trend(const TrendSpec::Variant& shape) {
  std::visit(overloaded{
                 [](const ConstantTrend& t) { require_finite(t.level, "trend level"); },
                 [](const LinearTrend& t) {
                   require_finite(t.start, "trend start");
                   require_finite(t.slope, "trend slope");
                 },
                 [](const SinusoidTrend& t) {
                   require_finite(t.amplitude, "trend amplitude");
                   require_finite(t.rate, "trend rate");
                   require_finite(t.phase, "trend phase");
                 },
                 [](const TableTrend& t) {
                   if (t.values.empty()) throw std::invalid_argument("table trend is empty");
                   for (double v : t.values) require_finite(v, "trend table value");
                 },
             },
             shape);
}

}  // namespace

TrendSpec::TrendSpec(Variant shape) : shape_(std::move(shape)) {
  validate_trend(shape_);
  lipschitz_k_ = lipschitz_of(shape_);
}

std::optional<std::int64_t> TrendSpec::length() const {
  if (const auto* table = std::get_if<TableTrend>(&shape_))
    return static_cast<std::int64_t>(table->values.size());
  return std::nullopt;
}

std::string describe(const TrendSpec& trend) {
  return std::visit(
      overloaded{
          [](const ConstantTrend& t) { return fmt::format("constant(level={})", t.level); },
          [](const LinearTrend& t) {
            return fmt::format("linear(start={}, slope={})", t.start, t.slope);
          },
          [](const SinusoidTrend& t) {
            return fmt::format("sin(amp={}, rate={}, phase={})", t.amplitude, t.rate, t.phase);
          },
          [](const TableTrend& t) { return fmt::format("table(n={})", t.values.size()); },
      },
      trend.shape());
}

double trend_value(const TrendSpec& trend, std::int64_t t) {
  if (t < 1) throw std::out_of_range(fmt::format("trend index must be >= 1, got {}", t));
  const auto s = static_cast<double>(t - 1);
  return std::visit(overloaded{
                        [](const ConstantTrend& c) { return c.level; },
                        [s](const LinearTrend& l) { return l.start + l.slope * s; },
                        [s](const SinusoidTrend& w) {
                          return w.amplitude * std::sin(w.rate * s + w.phase);
                        },
                        [t](const TableTrend& tab) {
                          if (t > static_cast<std::int64_t>(tab.values.size())) {
                            throw std::out_of_range(fmt::format(
                                "trend index {} past table length {}", t, tab.values.size()));
                          }
                          return tab.values[static_cast<std::size_t>(t - 1)];
                        },
                    },
                    trend.shape());
}

std::vector<double> sample_noise(const NoiseModel& noise, std::int64_t horizon,
                                 std::uint64_t seed, const SimulationOptions& options) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (options.burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
  validate(noise);

  PhiloxEngine rng(seed);
  const auto total = static_cast<std::size_t>(horizon + options.burn_in);
  std::vector<double> eps(total);

  std::visit(overloaded{
                 [&](const WhiteGaussian& m) {
                   const double sd = std::sqrt(m.variance);
                   for (auto& e : eps) e = sd * rng.normal();
                 },
                 [&](const MA1& m) {
                   const double sd = std::sqrt(m.variance);
                   const double scale = 1.0 / std::sqrt(1.0 + m.a * m.a);
                   double previous = sd * rng.normal();  // eta_0
                   for (auto& e : eps) {
                     const double current = sd * rng.normal();
                     e = (current + m.a * previous) * scale;
                     previous = current;
                   }
                 },
                 [&](const AR1& m) {
                   const double sd = std::sqrt(m.variance);
                   double state = sd / std::sqrt(1.0 - m.theta * m.theta) * rng.normal();
                   eps[0] = state;
                   for (std::size_t i = 1; i < eps.size(); ++i) {
                     state = m.theta * state + sd * rng.normal();
                     eps[i] = state;
                   }
                 },
                 [&](const MAq& m) {
                   const double sd = std::sqrt(m.variance);
                   const auto w = ma_weights(m);
                   const std::size_t q = w.size() - 1;
                   // ring of the q most recent innovations plus the current one
                   std::vector<double> eta(q + 1);
                   for (std::size_t j = 0; j < q; ++j) eta[j] = sd * rng.normal();
                   std::size_t head = q;
                   for (auto& e : eps) {
                     eta[head] = sd * rng.normal();
                     double acc = 0.0;
                     for (std::size_t j = 0; j <= q; ++j)
                       acc += w[j] * eta[(head + q + 1 - j) % (q + 1)];
                     e = acc;
                     head = (head + 1) % (q + 1);
                   }
                 },
             },
             noise);

  if (options.burn_in > 0) eps.erase(eps.begin(), eps.begin() + options.burn_in);
  return eps;
}

PathSample sample_path(const NoiseModel& noise, const TrendSpec& trend, std::int64_t horizon,
                       std::uint64_t seed, const SimulationOptions& options) {
  if (auto n = trend.length(); n && *n < horizon) {
    throw std::out_of_range(
        fmt::format("horizon {} exceeds table trend length {}", horizon, *n));
  }
  PathSample path;
  path.seed = seed;
  path.noise_description = describe(noise);
  path.trend_description = describe(trend);
  path.observations = sample_noise(noise, horizon, seed, options);
  path.trend.resize(path.observations.size());
  for (std::size_t i = 0; i < path.trend.size(); ++i) {
    path.trend[i] = trend_value(trend, static_cast<std::int64_t>(i) + 1);
    path.observations[i] += path.trend[i];
  }
  return path;
}

double sample_autocovariance(const std::vector<double>& series, std::int64_t lag) {
  const auto n = static_cast<std::int64_t>(series.size());
  const std::int64_t k = lag < 0 ? -lag : lag;
  if (n == 0 || k >= n) throw std::invalid_argument("lag must be smaller than the series length");
  double acc = 0.0;
  for (std::int64_t i = 0; i + k < n; ++i) acc += series[i] * series[i + k];
  return acc / static_cast<double>(n);
}

}  // namespace sestrack
