#include "sparse_score/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace sparse_score {

ScoreFn model_score(const ScoreModel& model) {
  return [&model](const Matrix& x, double t) -> Matrix {
    return model.kappa() * forward_batch(model, x, t);
  };
}

ScoreFn oracle_score(const TargetDensity& target, const VESchedule& sched) {
  return [&target, sched](const Matrix& x, double t) -> Matrix {
    return true_score_batch(target, x, ve_sigma(sched, t));
  };
}

std::vector<double> time_grid(int T, double eps) {
  if (T < 2) throw std::invalid_argument("time_grid: need at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(T));
  const double step = (1.0 - eps) / static_cast<double>(T - 1);
  for (int i = 0; i < T; ++i) grid[static_cast<std::size_t>(i)] = 1.0 - step * i;
  grid.back() = eps;
  return grid;
}

SampleRun langevin_sample(const ScoreFn& score, const VESchedule& sched, Index dim,
                          const SamplerOptions& opts) {
  if (opts.steps < 2) throw std::invalid_argument("langevin_sample: steps must be >= 2");
  if (opts.chains < 1) throw std::invalid_argument("langevin_sample: chains must be >= 1");
  if (dim < 1) throw std::invalid_argument("langevin_sample: dim must be >= 1");
  sched.validate();

  SampleRun run;
  run.T = opts.steps;
  run.eps = sched.eps;
  run.n = opts.chains;
  run.seed = opts.seed;
  run.grid = time_grid(opts.steps, sched.eps);
  run.eta = run.grid[0] - run.grid[1];

  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(opts.chains));
  for (Index i = 0; i < opts.chains; ++i) {
    streams.push_back(make_stream(opts.seed, static_cast<std::uint64_t>(i)));
  }
  // One distribution per chain: libstdc++ caches the second draw of each
  // pair, and a shared object would leak values between streams.
  std::vector<std::normal_distribution<double>> normal(static_cast<std::size_t>(opts.chains));

  const double sigma_1 = ve_sigma(sched, 1.0);
  Matrix x(opts.chains, dim);
  for (Index i = 0; i < opts.chains; ++i) {
    for (Index j = 0; j < dim; ++j) x(i, j) = sigma_1 * normal[static_cast<std::size_t>(i)](streams[static_cast<std::size_t>(i)]);
  }
  if (opts.record) {
    run.trajectories.reserve(static_cast<std::size_t>(opts.steps) + 1);
    run.trajectories.push_back(x);
  }

  std::vector<bool> alive(static_cast<std::size_t>(opts.chains), true);
  Vector z(dim);
  for (int k = 0; k < opts.steps; ++k) {
    const double t = run.grid[static_cast<std::size_t>(k)];
    const Matrix g = score(x, t);
    for (Index i = 0; i < opts.chains; ++i) {
      // Noise is drawn for every chain so streams stay aligned across modes.
      const auto c = static_cast<std::size_t>(i);
      for (Index j = 0; j < dim; ++j) z(j) = normal[c](streams[c]);
      if (!alive[c]) continue;

      double eta = run.eta;
      if (opts.snr > 0.0) {
        const double gnorm = g.row(i).norm();
        if (gnorm > 0.0) {
          const double ratio = opts.snr * z.norm() / gnorm;
          eta = 2.0 * ratio * ratio;
        }
      }
      Eigen::RowVectorXd next = x.row(i) + eta * g.row(i);
      if (!opts.zero_temperature) next += std::sqrt(2.0 * eta) * z.transpose();
      if (!next.allFinite()) {
        alive[c] = false;
        run.failures.push_back({i, k + 1});
        continue;
      }
      x.row(i) = next;
    }
    if (opts.record) run.trajectories.push_back(x);
  }
  run.finals = std::move(x);
  return run;
}

Vector reverse_mean(const Vector& x_t, const Vector& score_value, const DiscreteSchedule& sched, int t) {
  if (x_t.size() != score_value.size()) {
    throw std::invalid_argument("reverse_mean: point and score differ in length");
  }
  const double alpha = sched.alpha_at(t);
  return (x_t + (1.0 - alpha) * score_value) / std::sqrt(alpha);
}

Matrix discrete_reverse_sample(const DiscreteScoreFn& score, const DiscreteSchedule& sched,
                               Index dim, Index n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0xd15c);
  Matrix x = standard_normal(rng, n, dim);
  for (int t = sched.T; t >= 1; --t) {
    const double alpha = sched.alpha_at(t);
    const Matrix g = score(x, t);
    x = (x + (1.0 - alpha) * g) / std::sqrt(alpha);
    if (t > 1) x += std::sqrt((1.0 - alpha) / alpha) * standard_normal(rng, n, dim);
  }
  return x;
}

}  // namespace sparse_score
