// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Artifacts from the toy and sweep runs land under $SPARSE_SCORE_OUT, or a
// temporary directory when that is unset.

#include "sparse_score/checkpoint.hpp"
#include "sparse_score/metrics.hpp"
#include "sparse_score/objective.hpp"
#include "sparse_score/sampler.hpp"
#include "sparse_score/trainer.hpp"
#include "sparse_score_cli/commands.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace sparse_score;
using namespace sparse_score::cli;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

RunConfig preset(const std::map<std::string, std::string>& p) {
  RunConfig c;
  for (const auto& [k, v] : p) c.set(k, v);
  return c;
}

// 1. backward and dsm_grad against central differences.
Outcome gradient_check() {
  const VESchedule sched{25.0, 1e-5};
  std::mt19937_64 pick(2024);
  double worst = 0.0;
  int configs = 0;
  for (std::uint64_t seed = 0; configs < 50; ++seed) {
    Architecture a;
    a.dim = 1 + static_cast<Index>(pick() % 5);
    const Index width = 2 + static_cast<Index>(pick() % 31);
    a.hidden = std::vector<Index>(1 + pick() % 3, width);
    a.time_feat_dim = 2 * (1 + static_cast<Index>(pick() % 4));
    a.fourier_scale = 1.0 + static_cast<double>(pick() % 10);
    Constraints c;
    c.output_cap = pick() % 2 == 0;
    c.output_l1_cap = 0.2 + 0.1 * static_cast<double>(pick() % 10);
    const ScoreModel m = ScoreModel::init(a, seed, 0.5 + static_cast<double>(pick() % 20) / 10.0, c);

    Rng rng = make_stream(seed, 77);
    const Index b = 3;
    DsmBatch batch{standard_normal(rng, b, a.dim), Vector(b), standard_normal(rng, b, a.dim)};
    for (Index i = 0; i < b; ++i) batch.t(i) = 0.02 + 0.96 * uniform01(rng);
    const Vector x = standard_normal(rng, 1, a.dim).row(0).transpose();
    const Vector up = standard_normal(rng, 1, a.dim).row(0).transpose();
    const double t = 0.02 + 0.96 * uniform01(rng);

    // Central differences are meaningless across a ReLU or cap kink; redraw.
    bool smooth = oracle::kink_margin(m, x, t) > 1e-4;
    for (Index i = 0; i < b && smooth; ++i) {
      const double s = ve_sigma(sched, batch.t(i));
      const Vector xt = batch.x0.row(i).transpose() + s * batch.noise.row(i).transpose();
      smooth = oracle::kink_margin(m, xt, batch.t(i)) > 1e-4;
    }
    if (!smooth) continue;
    ++configs;

    auto with_theta = [&](const Vector& th) {
      ScoreModel p = m;
      p.theta() = th;
      return p;
    };
    const GradientBundle g = backward(m, x, t, up);
    const Vector fd_b = oracle::central_gradient(
        [&](const Vector& th) { return up.dot(m.kappa() * forward(with_theta(th), x, t)); }, m.theta(), 1e-6);
    worst = std::max(worst, oracle::relative_error(g.d_theta, fd_b));

    const double r = 0.01;
    const Weighting w = seed % 2 ? Weighting::sigma2 : Weighting::none;
    const DsmResult d = dsm_grad(m, batch, sched, r, w);
    const Vector fd_d = oracle::central_gradient(
        [&](const Vector& th) { return dsm_loss(with_theta(th), batch, sched, r, w).total; }, m.theta(), 1e-6);
    worst = std::max(worst, oracle::relative_error(d.grad.d_theta, fd_d));
    ScoreModel up_k = m, down_k = m;
    up_k.set_kappa(m.kappa() + 1e-6);
    down_k.set_kappa(m.kappa() - 1e-6);
    const double fd_k =
        (dsm_loss(up_k, batch, sched, r, w).total - dsm_loss(down_k, batch, sched, r, w).total) / 2e-6;
    worst = std::max(worst, oracle::relative_error(d.grad.d_kappa, fd_k));
  }
  return {worst <= 1e-5, "50 configs, worst relative error " + fmt(worst)};
}

// 2. true_score against central differences of log_density.
Outcome oracle_check() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2.0, 2.0), pos(0.1, 2.0), sig(0.02, 5.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + trial % 5;
    Vector mean(d), var(d), lo(d), hi(d), x(d);
    for (Index j = 0; j < d; ++j) {
      mean(j) = u(rng);
      var(j) = pos(rng);
      lo(j) = u(rng);
      hi(j) = lo(j) + pos(rng);
      x(j) = u(rng);
    }
    TargetDensity t = TargetDensity::gaussian(mean, var);
    if (trial % 3 == 1) {
      t = TargetDensity::mixture({{0.3, mean, var}, {0.5, -mean, var.reverse()}, {0.2, mean * 0.5, var * 2.0}});
    } else if (trial % 3 == 2) {
      std::vector<int> coords;
      for (Index j = 0; j < d; j += 2) coords.push_back(static_cast<int>(j));
      t = TargetDensity::gaussian_uniform(coords, mean, var, lo, hi);
    }
    const double s = sig(rng);
    const Vector fd = oracle::central_gradient([&](const Vector& p) { return log_density(t, p, s); }, x, 1e-5);
    worst = std::max(worst, oracle::relative_error(true_score(t, x, s), fd));
  }
  return {worst <= 1e-5, "100 triples over 3 kinds, worst relative error " + fmt(worst)};
}

// 3. Tilting identity on a 1-D Gaussian.
Outcome tilting_check() {
  const TargetDensity q = TargetDensity::gaussian(Vector::Constant(1, 0.4), Vector::Constant(1, 0.6));
  const DiscreteSchedule d = make_discrete(50, 1.0);
  double exact_max = 0.0, perturbed_min = 1e300;
  for (int t = 1; t <= 50; ++t) {
    const double x_t = 0.9;
    const auto [mean, sd] = reverse_posterior(q, d, t, x_t);
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(mean - 4.0 * sd + 8.0 * sd * i / 40.0);
    exact_max = std::max(exact_max, tilting_residual(q, d, t, grid, x_t));
    perturbed_min = std::min(perturbed_min, tilting_residual(q, d, t, grid, x_t, 0.1));
  }
  return {exact_max < 1e-8 && perturbed_min > 0.01,
          "exact max " + fmt(exact_max) + ", perturbed min " + fmt(perturbed_min)};
}

// 4. Sampler with the analytic score and with a zero score.
Outcome sampler_check() {
  const TargetDensity target = TargetDensity::gaussian(Vector::Zero(3), Vector::Ones(3));
  const VESchedule mixing{1.02, 1e-5};
  SamplerOptions o;
  o.steps = 200;
  o.chains = 5000;
  o.seed = 1;
  const SampleRun run = langevin_sample(oracle_score(target, mixing), mixing, 3, o);
  const double kl = kl_gaussian_moments(run.finals, target);

  const VESchedule wide{25.0, 1e-5};
  o.chains = 50000;
  o.seed = 2;
  const ScoreFn zero = [](const Matrix& x, double) { return Matrix(Matrix::Zero(x.rows(), x.cols())); };
  const SampleRun free = langevin_sample(zero, wide, 3, o);
  const double expected = std::pow(ve_sigma(wide, 1.0), 2) + 2.0 * free.eta * o.steps;
  double worst = 0.0;
  for (Index j = 0; j < 3; ++j) {
    const double mean = free.finals.col(j).mean();
    const double var = (free.finals.col(j).array() - mean).square().sum() / (free.finals.rows() - 1.0);
    worst = std::max(worst, std::abs(var / expected - 1.0));
  }
  return {kl < 0.05 && worst < 0.03,
          "KL " + fmt(kl) + " nats, zero-score variance off by " + fmt(100.0 * worst) + "%"};
}

// 5. Toy: regularized paths stay closer to the (y, z) plane.
Outcome toy_check() {
  const ToyOutcome out = cmd_toy(preset(toy_preset()));
  const bool pass = out.regularized.ratio < out.baseline.ratio && out.baseline.kl < 0.5 && out.regularized.kl < 0.5;
  return {pass, "ratio " + fmt(out.regularized.ratio) + " vs baseline " + fmt(out.baseline.ratio) + ", KL " +
                    fmt(out.regularized.kl) + " / " + fmt(out.baseline.kl) + " (" + out.report.directory.string() + ")"};
}

// 6. Gaussian-uniform dominance.
Outcome sweep_check() {
  const SweepOutcome out = cmd_sweep(preset(sweep_preset()));
  bool pass = !out.dominance.empty();
  std::string detail;
  for (const DominanceRow& row : out.dominance) {
    const bool need_strict = row.s == 1 || row.s == 2;
    const bool ok = row.within_one_stderr && (!need_strict || row.strictly_lower);
    pass = pass && ok;
    detail += "s=" + std::to_string(row.s) + ": " + fmt(row.regularized.mean_kl) + " vs " +
              fmt(row.baseline.mean_kl) + "+-" + fmt(row.baseline.stderr_kl) + (ok ? "" : " (fails)") + "; ";
  }
  for (const SweepCell& c : out.cells) {
    if (!c.ok) {
      pass = false;
      detail += "cell failed: " + c.error + "; ";
    }
  }
  return {pass, detail + "(" + out.report.directory.string() + ")"};
}

// 7. kappa-hat shrinks as r grows, paired seeds.
Outcome kappa_check() {
  RunConfig cfg = preset(toy_preset());
  const TargetDensity target = build_target(cfg);
  const Matrix data = training_data(cfg, target);
  std::vector<double> kappas;
  for (const char* r : {"0.0001", "0.001", "0.01"}) {
    cfg.set("objective.r", r);
    const TrainResult res = train(data, build_train_config(cfg), build_schedule(cfg),
                                  build_architecture(cfg, data.cols()), build_constraints(cfg));
    kappas.push_back(res.model.kappa());
  }
  const bool pass = kappas[1] <= kappas[0] && kappas[2] <= kappas[1];
  return {pass, "kappa " + fmt(kappas[0]) + " >= " + fmt(kappas[1]) + " >= " + fmt(kappas[2])};
}

// 8. Sparsity profile shape on the anisotropic Gaussian.
Outcome sparsity_check() {
  Vector v(3);
  v << 0.08, 1.0, 1.0;
  const TargetDensity target = TargetDensity::gaussian(Vector::Zero(3), v);
  const VESchedule sched{25.0, 1e-5};
  const std::vector<int> levels = {1, 2, 3};
  const SparsityProfile early = sparsity_profile(target, levels, sched, TimeBucket::early, 4000, 8);
  const SparsityProfile late = sparsity_profile(target, levels, sched, TimeBucket::late, 4000, 8);
  const SparsityProfile all = sparsity_profile(target, levels, sched, TimeBucket::all, 4000, 8);
  bool pass = true;
  for (const SparsityProfile* p : {&early, &late, &all}) {
    for (std::size_t k = 1; k < levels.size(); ++k) pass = pass && p->errors[k] <= p->errors[k - 1];
    pass = pass && p->errors.back() == 0.0;
  }
  for (std::size_t k = 0; k < levels.size(); ++k) pass = pass && early.errors[k] <= late.errors[k];
  return {pass, "early " + fmt(early.errors[0]) + "/" + fmt(early.errors[1]) + "/0, late " + fmt(late.errors[0]) +
                    "/" + fmt(late.errors[1]) + "/0"};
}

// 9. Determinism and feasibility with the default unit-ball constraints.
Outcome constraint_check() {
  Vector v(3);
  v << 0.08, 1.0, 1.0;
  const TargetDensity target = TargetDensity::gaussian(Vector::Zero(3), v);
  Rng data_rng = make_stream(0, 0xda7a);
  const Matrix data = sample(target, 512, data_rng);
  const VESchedule sched{25.0, 1e-5};
  Architecture arch;
  TrainConfig cfg;
  cfg.r = 0.001;
  cfg.epochs = 60;
  cfg.batch_size = 512;  // one step per epoch: the callback sees every step
  cfg.learning_rate = 0.01;
  cfg.projection = true;
  cfg.seed = 3;
  const Constraints unit;

  double worst_l1 = 0.0;
  int steps = 0;
  const TrainResult a = train(data, cfg, sched, arch, unit, [&](int, const ScoreModel& m) {
    worst_l1 = std::max(worst_l1, l1_norm(m.theta()));
    ++steps;
  });
  const TrainResult b = train(data, cfg, sched, arch, unit);
  const bool identical = checkpoint_to_json(a.model) == checkpoint_to_json(b.model);

  // Fuzz the output cap with an unprojected, large-weight model.
  Constraints capped;
  ScoreModel wild = ScoreModel::init(arch, 5, 1.0, capped);
  wild.theta() *= 50.0;
  Rng rng = make_stream(6);
  double worst_out = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double scale = std::pow(10.0, -2.0 + 5.0 * uniform01(rng));
    const Vector x = scale * standard_normal(rng, 1, 3).row(0).transpose();
    const double t = 1e-5 + (1.0 - 1e-5) * uniform01(rng);
    const ScoreModel& m = i % 2 ? wild : a.model;
    worst_out = std::max(worst_out, l1_norm(forward(m, x, t)));
  }
  const bool pass = identical && worst_l1 <= 1.0 + 1e-12 && worst_out <= 1.0 + 1e-12 && steps == cfg.epochs;
  return {pass, std::string(identical ? "checkpoints bit-identical" : "checkpoints differ") + ", max ||theta||_1 " +
                    fmt(worst_l1) + " over " + std::to_string(steps) + " steps, max ||s||_1 " + fmt(worst_out)};
}

}  // namespace

int main() {
  if (const char* env = std::getenv("SPARSE_SCORE_OUT"); env == nullptr || *env == '\0') {
    const auto root = std::filesystem::temp_directory_path() / "sparse_score_acceptance";
    ::setenv("SPARSE_SCORE_OUT", root.c_str(), 1);
  }

  const std::vector<Criterion> criteria = {
      {1, "gradient finite differences", 10, gradient_check},
      {2, "true score vs log density", 5, oracle_check},
      {3, "tilting identity", 5, tilting_check},
      {4, "sampler fidelity", 60, sampler_check},
      {5, "toy displacement ratio", 600, toy_check},
      {6, "gaussian-uniform dominance", 1800, sweep_check},
      {7, "kappa shrinkage", 900, kappa_check},
      {8, "sparsity profile", 120, sparsity_check},
      {9, "determinism and constraints", 300, constraint_check},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("[%s] %d %s: %s; %.1f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                out.detail.c_str(), secs, c.budget_seconds, in_time ? "" : " over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
