#include "sparse_score/checkpoint.hpp"
#include "sparse_score_cli/commands.hpp"
#include "sparse_score_cli/io.hpp"
#include "sparse_score_cli/plot.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace sparse_score::cli {

namespace {

std::string join_ints(int count) {
  std::string out;
  for (int j = 0; j < count; ++j) out += (j ? "," : "") + std::to_string(j);
  return out;
}

ToyArm run_toy_arm(const RunConfig& base, double r, const std::string& name, const Matrix& data,
                   const TargetDensity& target, RunReport& report) {
  RunConfig cfg = base;
  cfg.set("objective.r", format_double(r));
  const VESchedule sched = build_schedule(cfg);
  const TrainResult res =
      train(data, build_train_config(cfg), sched, build_architecture(cfg, data.cols()), build_constraints(cfg));

  save_checkpoint(report.path("checkpoint_" + name + ".json"), res.model, cfg.hash());
  report.add_artifact("checkpoint_" + name, "checkpoint_" + name + ".json");
  CsvWriter log(report.path("train_log_" + name + ".csv"), {"epoch", "step", "fit_term", "reg_term", "total", "kappa"});
  for (const StepRecord& s : res.history.steps) {
    log.field(s.epoch).field(s.step).field(s.loss.fit_term).field(s.loss.reg_term).field(s.loss.total).field(s.kappa);
    log.end_row();
  }
  log.close();
  report.add_artifact("train_log_" + name, "train_log_" + name + ".csv");

  SamplerOptions opts = build_sampler_options(cfg);
  opts.record = true;
  const SampleRun run = langevin_sample(model_score(res.model), sched, data.cols(), opts);
  write_trajectories(report.path("trajectories_" + name + ".bin"), run);
  report.add_artifact("trajectories_" + name, "trajectories_" + name + ".bin");

  ToyArm arm;
  arm.r = r;
  arm.kappa = res.model.kappa();
  arm.kl = sample_kl(cfg, target, run.finals).value;
  arm.ratio = displacement_ratio(run.trajectories);
  arm.mean_abs_step = Vector::Zero(data.cols());
  for (std::size_t k = 1; k < run.trajectories.size(); ++k) {
    arm.mean_abs_step += (run.trajectories[k] - run.trajectories[k - 1]).cwiseAbs().colwise().sum().transpose();
  }
  arm.mean_abs_step /= static_cast<double>(run.n) * static_cast<double>(run.trajectories.size() - 1);
  return arm;
}

Estimate mean_stderr(const std::vector<double>& v) {
  Estimate e;
  if (v.empty()) return e;
  double sum = 0.0;
  for (double x : v) sum += x;
  e.value = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - e.value) * (x - e.value);
    e.std_error = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return e;
}

}  // namespace

ToyOutcome cmd_toy(const RunConfig& cfg) {
  const TargetDensity target = build_target(cfg);
  if (target.dim() != 3) throw ConfigError("toy: target.dim must be 3");
  build_train_config(cfg);
  build_sampler_options(cfg);
  const double r = cfg.real("objective.r");

  ToyOutcome out;
  out.report = begin_run("toy", cfg);
  RunReport& report = out.report;
  const Matrix data = training_data(cfg, target);
  write_csv_matrix(report.path("data.csv"), data, {"x", "y", "z"});
  report.add_artifact("data", "data.csv");

  out.baseline = run_toy_arm(cfg, 0.0, "baseline", data, target, report);
  out.regularized = run_toy_arm(cfg, r, "regularized", data, target, report);

  CsvWriter table(report.path("displacement.csv"),
                  {"arm", "r", "kappa", "kl", "ratio", "mean_abs_dx", "mean_abs_dy", "mean_abs_dz"});
  for (const auto& [name, arm] : {std::pair{"baseline", &out.baseline}, std::pair{"regularized", &out.regularized}}) {
    table.field(name).field(arm->r).field(arm->kappa).field(arm->kl).field(arm->ratio);
    for (Index j = 0; j < 3; ++j) table.field(arm->mean_abs_step(j));
    table.end_row();
  }
  table.close();
  report.add_artifact("displacement", "displacement.csv");

  ToyPlotInputs plot;
  plot.data_csv = report.path("data.csv");
  plot.baseline_trajectories = report.path("trajectories_baseline.bin");
  plot.regularized_trajectories = report.path("trajectories_regularized.bin");
  plot.regularized_title = "regularized (r = " + format_double(r) + ")";
  plot_toy_svg(plot, report.path("toy.svg"));
  report.add_artifact("plot", "toy.svg");

  const std::uint64_t seed = cfg.seed("train.seed");
  for (const ToyArm* arm : {&out.baseline, &out.regularized}) {
    const std::map<std::string, std::string> p = {{"r", format_double(arm->r)}};
    report.metrics.push_back({"displacement_ratio", p, arm->ratio, 0.0, seed});
    report.metrics.push_back({"kl_moment_gaussian", p, arm->kl, 0.0, seed});
    report.metrics.push_back({"kappa_hat", p, arm->kappa, 0.0, seed});
  }
  finish_run(report, cfg);
  return out;
}

RunConfig sweep_cell_config(const RunConfig& cfg, double r, int T, int s, std::uint64_t seed) {
  RunConfig c = cfg;
  const std::string sd = std::to_string(seed);
  c.set("target.kind", "gaussian_uniform_product");
  c.set("target.gaussian_coords", join_ints(s));
  c.set("target.mean", cfg.str("sweep.gaussian_mean"));
  c.set("target.var", cfg.str("sweep.gaussian_var"));
  c.set("target.data_seed", sd);
  c.set("objective.r", format_double(r));
  c.set("train.seed", sd);
  c.set("sampler.steps", std::to_string(T));
  c.set("sampler.seed", sd);
  c.set("sampler.record", "false");
  c.set("metrics.seed", sd);
  return c;
}

SweepCell run_sweep_cell(const RunConfig& cell_cfg, double r, int T, int s, std::uint64_t seed) {
  SweepCell cell;
  cell.r = r;
  cell.T = T;
  cell.s = s;
  cell.seed = seed;
  try {
    const TargetDensity target = build_target(cell_cfg);
    const Matrix data = training_data(cell_cfg, target);
    const VESchedule sched = build_schedule(cell_cfg);
    const TrainResult res = train(data, build_train_config(cell_cfg), sched,
                                  build_architecture(cell_cfg, data.cols()), build_constraints(cell_cfg));
    const SampleRun run = langevin_sample(model_score(res.model), sched, data.cols(), build_sampler_options(cell_cfg));
    cell.kl = sample_kl(cell_cfg, target, run.finals).value;
    cell.kappa = res.model.kappa();
    cell.ok = std::isfinite(cell.kl);
    if (!cell.ok) cell.error = "non-finite KL estimate";
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

SweepOutcome cmd_sweep(const RunConfig& cfg) {
  const std::vector<double> rs = cfg.reals("sweep.r");
  const std::vector<long long> Ts = cfg.integers("sweep.T");
  const std::vector<long long> ss = cfg.integers("sweep.s");
  const std::vector<long long> seeds = cfg.integers("sweep.seeds");
  const long long workers = cfg.integer("sweep.workers");
  if (rs.empty() || Ts.empty() || ss.empty()) throw ConfigError("sweep: the grid over r, T and s must be nonempty");
  if (seeds.empty()) throw ConfigError("sweep: sweep.seeds lists no seeds");
  if (workers < 1) throw ConfigError("sweep: sweep.workers must be >= 1");
  const long long d = cfg.integer("target.dim");
  for (double r : rs) {
    if (!(r >= 0.0)) throw ConfigError("sweep: r values must be >= 0");
  }
  for (long long T : Ts) {
    if (T < 2) throw ConfigError("sweep: T values must be >= 2");
  }
  for (long long s : ss) {
    if (s < 1 || s > d) throw ConfigError("sweep: s values must lie in [1, target.dim]");
  }
  for (long long seed : seeds) {
    if (seed < 0) throw ConfigError("sweep: seeds must be >= 0");
  }

  // Resolve every cell config up front so bad settings fail before any work.
  struct Job {
    double r;
    int T;
    int s;
    std::uint64_t seed;
    RunConfig cfg;
  };
  std::vector<Job> jobs;
  for (double r : rs) {
    for (long long T : Ts) {
      for (long long s : ss) {
        for (long long seed : seeds) {
          Job j{r, static_cast<int>(T), static_cast<int>(s), static_cast<std::uint64_t>(seed),
                sweep_cell_config(cfg, r, static_cast<int>(T), static_cast<int>(s), static_cast<std::uint64_t>(seed))};
          build_target(j.cfg);
          build_train_config(j.cfg);
          build_sampler_options(j.cfg);
          jobs.push_back(std::move(j));
        }
      }
    }
  }

  SweepOutcome out;
  out.report = begin_run("sweep", cfg);
  out.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& j = jobs[i];
      out.cells[i] = run_sweep_cell(j.cfg, j.r, j.T, j.s, j.seed);
    }
  };
  const std::size_t width = std::min<std::size_t>(static_cast<std::size_t>(workers), jobs.size());
  if (width <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < width; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  RunReport& report = out.report;
  CsvWriter cells(report.path("cells.csv"), {"r", "T", "s", "seed", "status", "kl", "kappa", "error"});
  for (const SweepCell& c : out.cells) {
    cells.field(c.r).field(c.T).field(c.s).field(static_cast<long long>(c.seed)).field(c.ok ? "ok" : "failed");
    if (c.ok) {
      cells.field(c.kl).field(c.kappa);
    } else {
      cells.field("").field("");
    }
    cells.field(c.error).end_row();
    report.metrics.push_back({"kl_knn",
                              {{"r", format_double(c.r)},
                               {"T", std::to_string(c.T)},
                               {"s", std::to_string(c.s)},
                               {"status", c.ok ? "ok" : "failed"}},
                              c.ok ? c.kl : std::nan(""), 0.0, c.seed});
  }
  cells.close();
  report.add_artifact("cells", "cells.csv");

  std::map<std::tuple<double, int, int>, std::vector<double>> groups;
  for (const SweepCell& c : out.cells) {
    auto& g = groups[{c.r, c.T, c.s}];
    if (c.ok) g.push_back(c.kl);
  }
  CsvWriter agg(report.path("aggregate.csv"), {"r", "T", "s", "n_ok", "mean_kl", "stderr_kl"});
  std::map<std::tuple<double, int, int>, SweepAggregate> by_key;
  for (const auto& [key, values] : groups) {
    const Estimate e = mean_stderr(values);
    SweepAggregate a{std::get<0>(key), std::get<1>(key), std::get<2>(key), static_cast<int>(values.size()), e.value,
                     e.std_error};
    if (values.empty()) a.mean_kl = std::nan("");
    out.aggregates.push_back(a);
    by_key[key] = a;
    agg.field(a.r).field(a.T).field(a.s).field(a.n).field(a.mean_kl).field(a.stderr_kl).end_row();
  }
  agg.close();
  report.add_artifact("aggregate", "aggregate.csv");

  const bool has_baseline = std::find(rs.begin(), rs.end(), 0.0) != rs.end();
  if (has_baseline) {
    CsvWriter dom(report.path("dominance.csv"),
                  {"T", "s", "r", "baseline_mean_kl", "baseline_stderr", "regularized_mean_kl", "regularized_stderr",
                   "within_one_stderr", "strictly_lower"});
    for (long long T : Ts) {
      for (long long s : ss) {
        const SweepAggregate& b = by_key.at({0.0, static_cast<int>(T), static_cast<int>(s)});
        for (double r : rs) {
          if (r == 0.0) continue;
          const SweepAggregate& g = by_key.at({r, static_cast<int>(T), static_cast<int>(s)});
          DominanceRow row{static_cast<int>(T), static_cast<int>(s), r, b, g};
          const bool usable = b.n > 0 && g.n > 0;
          row.within_one_stderr = usable && g.mean_kl <= b.mean_kl + b.stderr_kl;
          row.strictly_lower = usable && g.mean_kl < b.mean_kl;
          out.dominance.push_back(row);
          dom.field(row.T).field(row.s).field(row.r).field(b.mean_kl).field(b.stderr_kl).field(g.mean_kl)
              .field(g.stderr_kl).field(row.within_one_stderr ? "true" : "false")
              .field(row.strictly_lower ? "true" : "false").end_row();
        }
      }
    }
    dom.close();
    report.add_artifact("dominance", "dominance.csv");
  }
  finish_run(report, cfg);
  return out;
}

}  // namespace sparse_score::cli
