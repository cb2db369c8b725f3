#include "sparse_score/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sparse_score {

void VESchedule::validate() const {
  if (!(sigma_max > 1.0)) {
    throw std::domain_error("VESchedule: sigma_max must exceed 1, got " + std::to_string(sigma_max));
  }
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::domain_error("VESchedule: eps must lie in (0, 1)");
  }
}

double ve_sigma(const VESchedule& sched, double t) {
  if (!(t > 0.0 && t <= 1.0)) {
    throw std::domain_error("ve_sigma: t must lie in (0, 1], got " + std::to_string(t));
  }
  if (!(sched.sigma_max > 1.0)) {
    throw std::domain_error("ve_sigma: sigma_max must exceed 1");
  }
  const double log_sigma = std::log(sched.sigma_max);
  // sigma^{2t} - 1 evaluated as expm1 so small t keeps full relative precision.
  return std::sqrt(std::expm1(2.0 * t * log_sigma) / (2.0 * log_sigma));
}

double DiscreteSchedule::beta_at(int t) const {
  if (t < 1 || t > T) {
    throw std::out_of_range("DiscreteSchedule: step " + std::to_string(t) + " outside [1, T]");
  }
  return beta[static_cast<std::size_t>(t - 1)];
}

double DiscreteSchedule::alpha_at(int t) const {
  if (t < 1 || t > T) {
    throw std::out_of_range("DiscreteSchedule: step " + std::to_string(t) + " outside [1, T]");
  }
  return alpha[static_cast<std::size_t>(t - 1)];
}

double DiscreteSchedule::step_bound() const {
  return c * std::log(static_cast<double>(T)) / static_cast<double>(T);
}

DiscreteSchedule make_discrete(int T, double c) {
  if (T < 2) {
    throw std::invalid_argument("make_discrete: T must be at least 2");
  }
  if (!(c > 0.0)) {
    throw std::invalid_argument("make_discrete: c must be positive");
  }
  const double b = c * std::log(static_cast<double>(T)) / static_cast<double>(T);
  if (!(b > 0.0 && b < 1.0)) {
    throw std::invalid_argument("make_discrete: c log(T)/T = " + std::to_string(b) +
                                " is not in (0, 1)");
  }
  DiscreteSchedule s;
  s.T = T;
  s.c = c;
  s.beta.assign(static_cast<std::size_t>(T), b);
  s.alpha.assign(static_cast<std::size_t>(T), 1.0 - b);
  s.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
  s.alpha_bar[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    s.alpha_bar[static_cast<std::size_t>(t)] = s.alpha_bar[static_cast<std::size_t>(t - 1)] * (1.0 - b);
  }
  return s;
}

DiscreteSchedule make_discrete_from_alpha(const std::vector<double>& alpha, double c) {
  if (alpha.empty()) {
    throw std::invalid_argument("make_discrete_from_alpha: empty alpha");
  }
  DiscreteSchedule s;
  s.T = static_cast<int>(alpha.size());
  s.c = c;
  s.alpha = alpha;
  s.beta.resize(alpha.size());
  s.alpha_bar.resize(alpha.size() + 1);
  s.alpha_bar[0] = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0 && alpha[i] <= 1.0)) {
      throw std::invalid_argument("make_discrete_from_alpha: alpha must lie in (0, 1]");
    }
    s.beta[i] = 1.0 - alpha[i];
    s.alpha_bar[i + 1] = s.alpha_bar[i] * alpha[i];
  }
  return s;
}

double alpha_bar_at(const DiscreteSchedule& sched, int t) {
  if (t < 0 || t > sched.T) {
    throw std::out_of_range("alpha_bar_at: t = " + std::to_string(t) + " outside [0, " +
                            std::to_string(sched.T) + "]");
  }
  return sched.alpha_bar[static_cast<std::size_t>(t)];
}

}  // namespace sparse_score
