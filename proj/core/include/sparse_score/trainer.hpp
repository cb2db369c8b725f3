#pragma once

#include "sparse_score/objective.hpp"
#include "sparse_score/schedule.hpp"
#include "sparse_score/scorenet.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace sparse_score {

struct TrainConfig {
  double r = 0.0;
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double eps = 1e-5;
  std::uint64_t seed = 0;
  bool projection = false;
  double kappa_init = 1.0;
  bool kappa_trainable = true;
  Weighting weighting = Weighting::none;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  /// Plain denoising score matching: r = 0, no projection, kappa frozen at 1.
  static TrainConfig baseline(TrainConfig base);
};

inline constexpr double kKappaFloor = 1e-6;

struct StepRecord {
  int epoch = 0;
  int step = 0;
  LossBreakdown loss;
  double kappa = 1.0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<double> kappa_per_epoch;  // value after each epoch
  std::vector<double> epoch_seconds;
};

struct TrainResult {
  ScoreModel model;
  TrainHistory history;
};

/// Raised when a minibatch loss or gradient stops being finite.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int step, std::vector<Index> batch_indices, double kappa)
      : std::runtime_error(what), step_(step), batch_(std::move(batch_indices)), kappa_(kappa) {}

  int step() const { return step_; }
  const std::vector<Index>& batch_indices() const { return batch_; }
  double kappa() const { return kappa_; }

 private:
  int step_;
  std::vector<Index> batch_;
  double kappa_;
};

/// Called after every epoch (1-based) with the current model.
using EpochCallback = std::function<void(int epoch, const ScoreModel& model)>;

/// Minibatch training: per epoch a seeded shuffle, per row t = U(0,1)(1-eps)+eps
/// and z ~ N(0, I), then one Adam step on (theta, kappa if trainable), the
/// kappa floor, and the l1 projection when enabled. Deterministic given
/// cfg.seed. Throws TrainingError on a non-finite loss.
TrainResult train(const Matrix& data, const TrainConfig& cfg, const VESchedule& sched,
                  const Architecture& arch, const Constraints& constraints = {},
                  const EpochCallback& on_epoch = {});

}  // namespace sparse_score
