#pragma once

#include "sparse_score/rng.hpp"
#include "sparse_score/schedule.hpp"
#include "sparse_score/scorenet.hpp"
#include "sparse_score/target.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace sparse_score {

/// Effective score evaluated on an n x d batch at one time t; returns n x d.
using ScoreFn = std::function<Matrix(const Matrix& x, double t)>;

/// kappa * s_theta(x, t) of a trained model.
ScoreFn model_score(const ScoreModel& model);

/// Exact grad log q_t of an analytic target under the VE kernel.
ScoreFn oracle_score(const TargetDensity& target, const VESchedule& sched);

struct SamplerOptions {
  int steps = 60;
  Index chains = 1000;
  std::uint64_t seed = 0;
  bool record = false;
  /// > 0 switches to the signal-to-noise step rule eta_i = 2 (snr |z_i| / |g_i|)^2.
  double snr = 0.0;
  /// Drops the noise term (diagnostic mode).
  bool zero_temperature = false;
};

struct ChainFailure {
  Index chain = 0;
  int step = 0;  // 1-based update index at which the state went non-finite
};

struct SampleRun {
  int T = 0;
  double eps = 0.0;
  double eta = 0.0;
  Index n = 0;
  std::uint64_t seed = 0;
  std::vector<double> grid;          // T points from 1 down to eps
  Matrix finals;                     // n x d
  std::vector<Matrix> trajectories;  // T + 1 slices of n x d when recorded
  std::vector<ChainFailure> failures;

  bool recorded() const { return !trajectories.empty(); }
};

/// linspace(1, eps, T).
std::vector<double> time_grid(int T, double eps);

/// Langevin sampling on the descending grid:
///   x_0 = sigma_1 N(0, I);  for t in grid: x <- x + eta score(x, t) + sqrt(2 eta) N(0, I)
/// with eta = grid[0] - grid[1]. Chain i draws from its own stream (seed, i).
/// A chain whose state turns non-finite keeps its last finite state and is
/// listed in `failures`. Throws std::invalid_argument if steps < 2 or chains < 1.
SampleRun langevin_sample(const ScoreFn& score, const VESchedule& sched, Index dim,
                          const SamplerOptions& opts);

/// (x_t + (1 - alpha_t) score) / sqrt(alpha_t), 1 <= t <= T.
Vector reverse_mean(const Vector& x_t, const Vector& score_value, const DiscreteSchedule& sched, int t);

/// Score of the discrete forward marginal at integer step t, batched.
using DiscreteScoreFn = std::function<Matrix(const Matrix& x, int t)>;

/// Discrete reverse chain x_{t-1} = u_t(x_t) + sqrt((1-alpha_t)/alpha_t) z,
/// starting from N(0, I) at t = T; the final step (t = 1) adds no noise.
Matrix discrete_reverse_sample(const DiscreteScoreFn& score, const DiscreteSchedule& sched,
                               Index dim, Index n, std::uint64_t seed);

}  // namespace sparse_score
