#pragma once

#include "sparse_score/metrics.hpp"
#include "sparse_score/sampler.hpp"
#include "sparse_score/schedule.hpp"
#include "sparse_score/scorenet.hpp"
#include "sparse_score/target.hpp"
#include "sparse_score/trainer.hpp"
#include "sparse_score_cli/config.hpp"
#include "sparse_score_cli/report.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sparse_score::cli {

// Pipeline pieces shared by every command. Each reads only the config.
TargetDensity build_target(const RunConfig& cfg);
VESchedule build_schedule(const RunConfig& cfg);
Architecture build_architecture(const RunConfig& cfg, Index dim);
Constraints build_constraints(const RunConfig& cfg);
TrainConfig build_train_config(const RunConfig& cfg);
SamplerOptions build_sampler_options(const RunConfig& cfg);

/// Ingested dataset when target.data is set, otherwise target.n draws from the
/// target with stream (target.data_seed, 0xda7a).
Matrix training_data(const RunConfig& cfg, const TargetDensity& target);

/// KL of the samples to the target: moment-matched Gaussian KL for a Gaussian
/// target, otherwise the kNN estimate against metrics.n_mc reference draws.
MetricRecord sample_kl(const RunConfig& cfg, const TargetDensity& target, const Matrix& samples);

/// Sum over chains and steps of |dx_0| divided by the sum of |dx_1| + |dx_2|.
double displacement_ratio(const std::vector<Matrix>& trajectories);

RunReport cmd_train(const RunConfig& cfg);
/// Uses the checkpoint's model, or the target's exact score when none is given.
RunReport cmd_sample(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint);
RunReport cmd_eval(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint);
RunReport cmd_audit(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint);

struct ToyArm {
  double r = 0.0;
  double kappa = 0.0;
  double kl = 0.0;
  double ratio = 0.0;
  Vector mean_abs_step;  // per coordinate, averaged over chains and steps
};

struct ToyOutcome {
  RunReport report;
  ToyArm baseline;
  ToyArm regularized;
};

/// Trains r = 0 and r = objective.r under one seed, samples both with recorded
/// trajectories, writes the displacement table and the 3-panel SVG.
ToyOutcome cmd_toy(const RunConfig& cfg);

struct SweepCell {
  double r = 0.0;
  int T = 0;
  int s = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double kl = 0.0;
  double kappa = 0.0;
};

struct SweepAggregate {
  double r = 0.0;
  int T = 0;
  int s = 0;
  int n = 0;
  double mean_kl = 0.0;
  double stderr_kl = 0.0;
};

/// Regularized (r > 0) against the r = 0 baseline at one (T, s).
struct DominanceRow {
  int T = 0;
  int s = 0;
  double r = 0.0;
  SweepAggregate baseline;
  SweepAggregate regularized;
  bool within_one_stderr = false;  // reg mean <= base mean + base stderr
  bool strictly_lower = false;     // reg mean < base mean
};

struct SweepOutcome {
  RunReport report;
  std::vector<SweepCell> cells;
  std::vector<SweepAggregate> aggregates;
  std::vector<DominanceRow> dominance;
};

/// Config of one sweep cell: the Gaussian-uniform target with s Gaussian
/// coordinates, and every seed set to `seed`.
RunConfig sweep_cell_config(const RunConfig& cfg, double r, int T, int s, std::uint64_t seed);

/// Train, sample and estimate KL for one cell. Never throws; failures are
/// recorded in the cell.
SweepCell run_sweep_cell(const RunConfig& cell_cfg, double r, int T, int s, std::uint64_t seed);

/// Throws ConfigError before any work if the grid is empty.
SweepOutcome cmd_sweep(const RunConfig& cfg);

}  // namespace sparse_score::cli
