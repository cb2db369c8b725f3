#pragma once

#include "sparse_score/sampler.hpp"
#include "sparse_score/schedule.hpp"
#include "sparse_score/target.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sparse_score {

/// Monte-Carlo mean with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// E ||score(X_t, t) - grad log q_t(X_t)||^2 with t ~ U(eps, 1] (n_t draws) and
/// n_x draws of X_t ~ q_t per time.
Estimate score_error(const ScoreFn& score, const TargetDensity& target, const VESchedule& sched,
                     int n_t, int n_x, std::uint64_t seed);

/// Time buckets follow sampling order: sampling starts at t = 1, so `early`
/// covers t in [0.5, 1] and `late` covers t in (eps, 0.5).
enum class TimeBucket { all, early, late };

std::string to_string(TimeBucket b);
TimeBucket time_bucket_from_string(const std::string& name);

struct SparsityProfile {
  std::vector<int> s_levels;
  TimeBucket bucket = TimeBucket::all;
  std::vector<double> errors;  // mean ||g - top_s(g)||^2 per level
};

/// Keeps the s largest-magnitude coordinates of g and zeroes the rest.
Vector truncate_top_s(const Vector& g, int s);

/// Truncation error of the exact score at each sparsity level, averaged over
/// n_mc draws of (t, X_t) with t uniform in the bucket. Every level sees the
/// same draws. Throws std::invalid_argument if a level is outside [1, d].
SparsityProfile sparsity_profile(const TargetDensity& target, const std::vector<int>& s_levels,
                                 const VESchedule& sched, TimeBucket bucket, int n_mc,
                                 std::uint64_t seed);

/// Tilting-factor identity on a 1-D Gaussian under the discrete forward
/// process. Over the grid of x_{t-1} values computes
///   R = log q_{t-1|t} - log p^s_{t-1|t} - zeta_{t,t-1}
/// where p^s uses the exact score at x_t plus `score_shift`, and zeta uses the
/// exact score. Returns max(R) - min(R); zero when the identity holds.
/// Throws std::invalid_argument for a non-Gaussian or multi-dimensional
/// target, or a grid with fewer than 2 points.
double tilting_residual(const TargetDensity& target, const DiscreteSchedule& sched, int t,
                        const std::vector<double>& grid, double x_t, double score_shift = 0.0);

/// Posterior mean and standard deviation of q_{t-1|t}(. | x_t) for a 1-D Gaussian.
std::pair<double, double> reverse_posterior(const TargetDensity& target, const DiscreteSchedule& sched,
                                            int t, double x_t);

/// k-nearest-neighbour estimate of KL(P || Q) in nats from samples of P (n x d)
/// and Q (m x d), clamped below at 0. Distances are floored at 1e-12.
/// Throws std::invalid_argument unless n, m > k >= 1 and dimensions agree.
double kl_knn(const Matrix& samples_p, const Matrix& samples_q, int k = 5);

struct BoundAudit {
  int T = 0;
  int s = 0;
  double B = 0.0;
  bool B_estimated = false;
  double second_moment = 0.0;
  double init_term = 0.0;        // M / T^2
  double reverse_term = 0.0;     // (1/T) max{1, 9 (s B)^2}
  double estimation_term = 0.0;  // mean ||kappa s - grad log q_t||^2 + r kappa^2
  double kl_measured = 0.0;
  std::string kl_estimator;
  double computed_sum = 0.0;
  std::vector<std::string> unresolved;
};

struct AuditInputs {
  ScoreFn score;  // effective score kappa * s
  double kappa = 1.0;
  double r = 0.0;
  int T = 100;      // sampling steps
  int s = 1;        // sparsity level
  double B = -1.0;  // derivative bound; negative means estimate it
  int n_mc = 2000;
  std::uint64_t seed = 0;
};

/// Fills each computable term of the KL bound and lists the ones that are not
/// computable. The inequality itself is reported, never asserted.
BoundAudit bound_audit(const AuditInputs& in, const TargetDensity& target, const VESchedule& sched);

/// Largest |d_j log q_t(x)| over n_mc draws of (t, X_t).
double estimate_derivative_bound(const TargetDensity& target, const VESchedule& sched, int n_mc,
                                 std::uint64_t seed);

}  // namespace sparse_score
