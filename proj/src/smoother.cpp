#include "sestrack/smoother.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "sestrack/overloaded.hpp"

namespace sestrack {

void validate_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(fmt::format("alpha must lie in (0, 1), got {}", alpha));
  }
}

SmootherState::SmootherState(double estimate, double alpha, std::int64_t step)
    : estimate_(estimate), alpha_(alpha), step_(step) {
  validate_alpha(alpha);
  if (!std::isfinite(estimate)) throw std::invalid_argument("estimate must be finite");
  if (step < 1) throw std::invalid_argument("step must be >= 1");
}

SmootherState ses_step(const SmootherState& state, double x) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument(fmt::format("non-finite observation at step {}", state.step()));
  }
  const double grad = quadratic_loss_gradient(state.estimate(), x);
  return {state.estimate() - state.alpha() * grad, state.alpha(), state.step() + 1};
}

std::vector<double> ses_run(std::span<const double> observations, double alpha,
                            InitPolicy init) {
  validate_alpha(alpha);
  if (observations.empty()) throw std::invalid_argument("ses_run: no observations");

  const double first = std::visit(overloaded{
                                      [&](FirstObservation) { return observations.front(); },
                                      [](FixedInit f) { return f.value; },
                                  },
                                  init);
  std::vector<double> trajectory;
  trajectory.reserve(observations.size() + 1);
  SmootherState state(first, alpha);
  trajectory.push_back(state.estimate());
  for (double x : observations) {
    state = ses_step(state, x);
    trajectory.push_back(state.estimate());
  }
  return trajectory;
}

double ses_closed_form(std::span<const double> observations, double alpha, double initial,
                       std::int64_t t) {
  validate_alpha(alpha);
  const auto n = static_cast<std::int64_t>(observations.size());
  if (t < 1 || t > n + 1) {
    throw std::out_of_range(fmt::format("closed form index {} outside [1, {}]", t, n + 1));
  }
  const double beta = 1.0 - alpha;
  // Walk j = t-1 down to 1 so the weight beta^{t-1-j} grows by one factor per term.
  double weight = 1.0;
  double sum = 0.0;
  for (std::int64_t j = t - 1; j >= 1; --j) {
    sum += weight * observations[static_cast<std::size_t>(j - 1)];
    weight *= beta;
  }
  return weight * initial + alpha * sum;
}

LogDensityModel LogDensityModel::gaussian(double variance, double alpha) {
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian model needs variance > 0");
  validate_alpha(alpha);
  LogDensityModel model;
  model.effective_step = alpha * variance;
  model.score = [variance](double x, double m) { return (x - m) / variance; };
  model.log_density = [variance](double x, double m) {
    const double r = x - m;
    return -0.5 * std::log(2.0 * std::numbers::pi * variance) - r * r / (2.0 * variance);
  };
  return model;
}

LogDensityModel LogDensityModel::laplace(double scale, double effective_step) {
  if (!(scale > 0.0)) throw std::invalid_argument("laplace model needs scale > 0");
  LogDensityModel model;
  model.effective_step = effective_step;
  model.score = [scale](double x, double m) {
    const double r = x - m;
    return ((r > 0.0) - (r < 0.0)) / scale;
  };
  model.log_density = [scale](double x, double m) {
    return -std::abs(x - m) / scale - std::log(2.0 * scale);
  };
  return model;
}

SmootherState sga_step(const SmootherState& state, const LogDensityModel& model, double x) {
  if (!(model.effective_step > 0.0)) throw std::invalid_argument("effective step must be > 0");
  if (!model.score) throw std::invalid_argument("model has no score function");
  const double score = model.score(x, state.estimate());
  if (!std::isfinite(score)) {
    throw std::invalid_argument(
        fmt::format("non-finite score at x={}, estimate={}", x, state.estimate()));
  }
  return {state.estimate() + model.effective_step * score, state.alpha(), state.step() + 1};
}

std::vector<double> running_mean(std::span<const double> observations) {
  if (observations.empty()) throw std::invalid_argument("running_mean: no observations");
  std::vector<double> means;
  means.reserve(observations.size());
  double mean = 0.0;
  std::size_t n = 0;
  for (double x : observations) {
    ++n;
    mean += (x - mean) / static_cast<double>(n);
    means.push_back(mean);
  }
  return means;
}

}  // namespace sestrack
