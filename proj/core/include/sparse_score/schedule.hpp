#pragma once

#include <vector>

namespace sparse_score {

/// Variance-exploding perturbation kernel x_t = x_0 + sigma_t z with
/// sigma_t^2 = (sigma_max^{2t} - 1) / (2 ln sigma_max), t in (0, 1].
struct VESchedule {
  double sigma_max = 25.0;
  double eps = 1e-5;

  /// Throws std::domain_error unless sigma_max > 1 and 0 < eps < 1.
  void validate() const;
};

/// Standard deviation of the VE kernel at time t.
/// Throws std::domain_error if t is outside (0, 1] or sigma_max <= 1.
double ve_sigma(const VESchedule& sched, double t);

/// Discrete forward process x_t = sqrt(alpha_t) x_{t-1} + sqrt(1 - alpha_t) z.
/// Index 0 of `beta` / `alpha` holds step t = 1; `alpha_bar` holds t = 0..T.
struct DiscreteSchedule {
  int T = 0;
  double c = 1.0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  double beta_at(int t) const;   // 1 <= t <= T
  double alpha_at(int t) const;  // 1 <= t <= T
  double step_bound() const;     // c log(T) / T
};

/// Constant schedule beta_t = c log(T) / T, which meets the step-size bound
/// 1 - alpha_t <= c log(T) / T with equality.
DiscreteSchedule make_discrete(int T, double c = 1.0);

/// Builds a schedule from explicit per-step alphas (each in (0, 1]).
DiscreteSchedule make_discrete_from_alpha(const std::vector<double>& alpha, double c = 1.0);

/// prod_{i <= t} alpha_i, with the empty product 1 at t = 0.
/// Throws std::out_of_range for t outside [0, T].
double alpha_bar_at(const DiscreteSchedule& sched, int t);

}  // namespace sparse_score
