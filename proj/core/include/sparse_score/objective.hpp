#pragma once

#include "sparse_score/schedule.hpp"
#include "sparse_score/scorenet.hpp"

#include <string>

namespace sparse_score {

/// total = fit_term + reg_term, reg_term = r * kappa^2.
struct LossBreakdown {
  double total = 0.0;
  double fit_term = 0.0;
  double reg_term = 0.0;
  double r = 0.0;
};

/// Per-row loss weighting. `none` is the plain mean squared residual;
/// `sigma2` multiplies row i by sigma_{t_i}^2.
enum class Weighting { none, sigma2 };

std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& name);

/// One minibatch of the denoising objective: clean rows, their times, and the
/// standard normal noise that perturbs them.
struct DsmBatch {
  Matrix x0;     // b x d
  Vector t;      // b, each in (0, 1]
  Matrix noise;  // b x d
};

struct DsmResult {
  GradientBundle grad;
  LossBreakdown loss;
};

/// mean_i w_i ||kappa s(x_t^i, t_i) - (-z_i / sigma_{t_i})||^2 + r kappa^2 with
/// x_t^i = x0_i + sigma_{t_i} z_i. Throws std::invalid_argument on shape
/// mismatch or r < 0.
LossBreakdown dsm_loss(const ScoreModel& model, const DsmBatch& batch, const VESchedule& sched,
                       double r, Weighting weighting = Weighting::none);

/// dsm_loss together with its exact gradient in theta and kappa.
DsmResult dsm_grad(const ScoreModel& model, const DsmBatch& batch, const VESchedule& sched, double r,
                   Weighting weighting = Weighting::none);

}  // namespace sparse_score
