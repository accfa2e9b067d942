#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace sestrack {

/// Rejects alpha outside the open interval (0, 1).
void validate_alpha(double alpha);

/// Current trend estimate m_hat_t of the smoother. The update
///
///   m_hat_{t+1} = (1 - alpha) m_hat_t + alpha x_t
///
/// pairs m_hat_{t+1} with the trend value m*_t at the time of x_t, i.e. the
/// estimate lags the observation index by one.
class SmootherState {
 public:
  SmootherState(double estimate, double alpha, std::int64_t step = 1);

  double estimate() const noexcept { return estimate_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return 1.0 - alpha_; }
  std::int64_t step() const noexcept { return step_; }

 private:
  double estimate_;
  double alpha_;
  std::int64_t step_;
};

/// Gradient of the per-step quadratic loss  m -> (m - x)^2 / 2.
inline double quadratic_loss_gradient(double estimate, double x) noexcept {
  return estimate - x;
}

/// One SES update, written as a gradient step on the quadratic loss.
/// Throws std::invalid_argument for non-finite x.
SmootherState ses_step(const SmootherState& state, double x);

struct FirstObservation {};
struct FixedInit {
  double value = 0.0;
};
using InitPolicy = std::variant<FirstObservation, FixedInit>;

/// m_hat_1 .. m_hat_{T+1} for observations x_1 .. x_T.
std::vector<double> ses_run(std::span<const double> observations, double alpha,
                            InitPolicy init = FirstObservation{});

/// beta^{t-1} m_hat_1 + alpha * sum_{j<t} beta^{t-1-j} x_j by direct
/// summation; valid for 1 <= t <= T + 1.
double ses_closed_form(std::span<const double> observations, double alpha, double initial,
                       std::int64_t t);

/// Score-driven update  m_hat + step * d/dm ln p(x - m) |_{m = m_hat}.
///
/// For Gaussian noise with variance gamma0 the score is (x - m)/gamma0 and
/// step = alpha * gamma0 reproduces ses_step. For other log-concave densities
/// the effective step is a user choice; nothing here estimates curvature
/// bounds of the density.
struct LogDensityModel {
  std::function<double(double x, double estimate)> score;
  double effective_step = 0.0;
  /// ln p(x - estimate); optional, used for gradient checks.
  std::function<double(double x, double estimate)> log_density;

  static LogDensityModel gaussian(double variance, double alpha);
  /// Laplace density with scale b: score = sign(x - m) / b.
  static LogDensityModel laplace(double scale, double effective_step);
};

/// Throws std::invalid_argument when the score at (x, estimate) is not finite.
SmootherState sga_step(const SmootherState& state, const LogDensityModel& model, double x);

/// Arithmetic means (1/t) sum_{j<=t} x_j, updated incrementally.
std::vector<double> running_mean(std::span<const double> observations);

}  // namespace sestrack
