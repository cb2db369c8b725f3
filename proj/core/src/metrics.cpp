#include "sparse_score/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace sparse_score {

namespace {

Estimate mean_and_stderr(const std::vector<double>& values) {
  Estimate e;
  const double n = static_cast<double>(values.size());
  if (values.empty()) return e;
  e.value = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.value) * (v - e.value);
    e.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

double draw_time(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double gaussian_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

}  // namespace

Estimate score_error(const ScoreFn& score, const TargetDensity& target, const VESchedule& sched,
                     int n_t, int n_x, std::uint64_t seed) {
  if (n_t < 1 || n_x < 1) throw std::invalid_argument("score_error: n_t and n_x must be >= 1");
  Rng rng = make_stream(seed, 0x5c0e);
  std::vector<double> per_time;
  per_time.reserve(static_cast<std::size_t>(n_t));
  for (int i = 0; i < n_t; ++i) {
    const double t = draw_time(rng, sched.eps, 1.0);
    const double sigma = ve_sigma(sched, t);
    const Matrix x = sample_perturbed(target, n_x, sigma, rng);
    const Matrix diff = score(x, t) - true_score_batch(target, x, sigma);
    per_time.push_back(diff.rowwise().squaredNorm().mean());
  }
  return mean_and_stderr(per_time);
}

std::string to_string(TimeBucket b) {
  switch (b) {
    case TimeBucket::all:
      return "all";
    case TimeBucket::early:
      return "early";
    case TimeBucket::late:
      return "late";
  }
  return "all";
}

TimeBucket time_bucket_from_string(const std::string& name) {
  if (name == "all") return TimeBucket::all;
  if (name == "early") return TimeBucket::early;
  if (name == "late") return TimeBucket::late;
  throw std::invalid_argument("unknown time bucket '" + name + "'");
}

Vector truncate_top_s(const Vector& g, int s) {
  const Index d = g.size();
  if (s >= d) return g;
  Vector out = Vector::Zero(d);
  if (s <= 0) return out;
  std::vector<Index> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::partial_sort(idx.begin(), idx.begin() + s, idx.end(), [&](Index a, Index b) {
    const double ma = std::abs(g(a));
    const double mb = std::abs(g(b));
    return ma > mb || (ma == mb && a < b);
  });
  for (int k = 0; k < s; ++k) out(idx[static_cast<std::size_t>(k)]) = g(idx[static_cast<std::size_t>(k)]);
  return out;
}

SparsityProfile sparsity_profile(const TargetDensity& target, const std::vector<int>& s_levels,
                                 const VESchedule& sched, TimeBucket bucket, int n_mc,
                                 std::uint64_t seed) {
  if (n_mc < 1) throw std::invalid_argument("sparsity_profile: n_mc must be >= 1");
  for (int s : s_levels) {
    if (s < 1 || s > target.dim()) {
      throw std::invalid_argument("sparsity_profile: level " + std::to_string(s) + " outside [1, d]");
    }
  }
  double lo = sched.eps;
  double hi = 1.0;
  if (bucket == TimeBucket::early) lo = 0.5;
  if (bucket == TimeBucket::late) hi = 0.5;

  Rng rng = make_stream(seed, 0x5a25);
  SparsityProfile profile;
  profile.s_levels = s_levels;
  profile.bucket = bucket;
  profile.errors.assign(s_levels.size(), 0.0);
  for (int i = 0; i < n_mc; ++i) {
    const double t = draw_time(rng, lo, hi);
    const double sigma = ve_sigma(sched, t);
    const Matrix x = sample_perturbed(target, 1, sigma, rng);
    const Vector g = true_score(target, Vector(x.row(0).transpose()), sigma);
    for (std::size_t k = 0; k < s_levels.size(); ++k) {
      profile.errors[k] += (g - truncate_top_s(g, s_levels[k])).squaredNorm();
    }
  }
  for (double& e : profile.errors) e /= static_cast<double>(n_mc);
  return profile;
}

std::pair<double, double> reverse_posterior(const TargetDensity& target, const DiscreteSchedule& sched,
                                            int t, double x_t) {
  if (target.kind() != TargetKind::gaussian || target.dim() != 1) {
    throw std::invalid_argument("tilting: target must be a 1-D Gaussian");
  }
  const double mu = target.mean()(0);
  const double v = target.var()(0);
  const double ab_prev = alpha_bar_at(sched, t - 1);
  const double alpha = sched.alpha_at(t);
  const double prior_mean = std::sqrt(ab_prev) * mu;
  const double prior_var = ab_prev * v + 1.0 - ab_prev;
  const double precision = 1.0 / prior_var + alpha / (1.0 - alpha);
  const double mean = (prior_mean / prior_var + std::sqrt(alpha) * x_t / (1.0 - alpha)) / precision;
  return {mean, std::sqrt(1.0 / precision)};
}

double tilting_residual(const TargetDensity& target, const DiscreteSchedule& sched, int t,
                        const std::vector<double>& grid, double x_t, double score_shift) {
  if (grid.size() < 2) throw std::invalid_argument("tilting_residual: grid needs >= 2 points");
  const auto [post_mean, post_sd] = reverse_posterior(target, sched, t, x_t);

  const double mu = target.mean()(0);
  const double v = target.var()(0);
  const double alpha = sched.alpha_at(t);
  const double ab_prev = alpha_bar_at(sched, t - 1);
  const double ab = alpha_bar_at(sched, t);

  // Marginals of the discrete forward process: N(sqrt(ab) mu, ab v + 1 - ab).
  const double prev_mean = std::sqrt(ab_prev) * mu;
  const double prev_var = ab_prev * v + 1.0 - ab_prev;
  const double cur_mean = std::sqrt(ab) * mu;
  const double cur_var = ab * v + 1.0 - ab;
  const double exact_score = -(x_t - cur_mean) / cur_var;

  const double sparse_score = exact_score + score_shift;
  const double u = (x_t + (1.0 - alpha) * sparse_score) / std::sqrt(alpha);
  const double step_var = (1.0 - alpha) / alpha;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double y : grid) {
    const double log_q = gaussian_logpdf(y, post_mean, post_sd * post_sd);
    const double log_p = gaussian_logpdf(y, u, step_var);
    const double zeta = gaussian_logpdf(y, prev_mean, prev_var) - std::sqrt(alpha) * y * exact_score;
    const double r = log_q - log_p - zeta;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return hi - lo;
}

double kl_knn(const Matrix& samples_p, const Matrix& samples_q, int k) {
  const Index n = samples_p.rows();
  const Index m = samples_q.rows();
  const Index d = samples_p.cols();
  if (k < 1 || n <= k || m <= k) throw std::invalid_argument("kl_knn: need n, m > k >= 1");
  if (samples_q.cols() != d) throw std::invalid_argument("kl_knn: dimension mismatch");

  // Row-major copies keep each point contiguous for the brute-force scans.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor p = samples_p;
  const RowMajor q = samples_q;
  constexpr double kFloor = 1e-12;

  // k-th smallest squared distance from `point` to the rows of `pool`,
  // optionally skipping one row (the point itself).
  auto kth = [&](const double* point, const RowMajor& pool, Index skip) {
    std::vector<double> best(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
    for (Index r = 0; r < pool.rows(); ++r) {
      if (r == skip) continue;
      const double* other = pool.data() + r * d;
      double dist = 0.0;
      for (Index j = 0; j < d; ++j) {
        const double diff = point[j] - other[j];
        dist += diff * diff;
      }
      if (dist < best.back()) {
        auto pos = std::upper_bound(best.begin(), best.end(), dist);
        best.insert(pos, dist);
        best.pop_back();
      }
    }
    return std::max(std::sqrt(best.back()), kFloor);
  };

  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double* point = p.data() + i * d;
    const double rho = kth(point, p, i);
    const double nu = kth(point, q, -1);
    acc += std::log(nu / rho);
  }
  const double estimate = static_cast<double>(d) * acc / static_cast<double>(n) +
                          std::log(static_cast<double>(m) / static_cast<double>(n - 1));
  return std::max(0.0, estimate);
}

double estimate_derivative_bound(const TargetDensity& target, const VESchedule& sched, int n_mc,
                                 std::uint64_t seed) {
  Rng rng = make_stream(seed, 0xb0b0);
  double best = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    const double t = draw_time(rng, sched.eps, 1.0);
    const double sigma = ve_sigma(sched, t);
    const Matrix x = sample_perturbed(target, 1, sigma, rng);
    const Vector g = true_score(target, Vector(x.row(0).transpose()), sigma);
    best = std::max(best, g.cwiseAbs().maxCoeff());
  }
  return best;
}

BoundAudit bound_audit(const AuditInputs& in, const TargetDensity& target, const VESchedule& sched) {
  if (in.T < 2) throw std::invalid_argument("bound_audit: T must be >= 2");
  if (in.n_mc < 10) throw std::invalid_argument("bound_audit: n_mc must be >= 10");
  BoundAudit a;
  a.T = in.T;
  a.s = in.s;
  a.B_estimated = in.B < 0.0;
  a.B = a.B_estimated ? estimate_derivative_bound(target, sched, in.n_mc, in.seed) : in.B;
  a.second_moment = target.second_moment();
  const double T = static_cast<double>(in.T);
  a.init_term = a.second_moment / (T * T);
  const double sb = static_cast<double>(in.s) * a.B;
  a.reverse_term = std::max(1.0, 9.0 * sb * sb) / T;

  const Estimate err = score_error(in.score, target, sched, std::max(10, in.n_mc / 50), 50, in.seed);
  a.estimation_term = err.value + in.r * in.kappa * in.kappa;

  SamplerOptions opts;
  opts.steps = in.T;
  opts.chains = in.n_mc;
  opts.seed = in.seed;
  const SampleRun run = langevin_sample(in.score, sched, target.dim(), opts);
  if (target.kind() == TargetKind::gaussian) {
    a.kl_measured = kl_gaussian_moments(run.finals, target);
    a.kl_estimator = "moment_gaussian";
  } else {
    Rng rng = make_stream(in.seed, 0xa0d1);
    const Matrix reference = sample(target, in.n_mc, rng);
    a.kl_measured = kl_knn(reference, run.finals, 5);
    a.kl_estimator = "knn_k5";
  }
  a.computed_sum = a.init_term + a.reverse_term + a.estimation_term;
  a.unresolved = {
      "C_x: input-dependent constant in the empirical-process term (not computable)",
      "Delta_T(log q, log q^s): auxiliary-density gap (requires the auxiliary density q^s)",
      "epsilon: sparsity accuracy, defined only relative to a chosen q^s",
      "a, a': relaxed-sparsity exponents (not identified from data)",
  };
  return a;
}

}  // namespace sparse_score
