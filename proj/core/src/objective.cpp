#include "sparse_score/objective.hpp"

#include <stdexcept>

namespace sparse_score {

std::string to_string(Weighting w) { return w == Weighting::none ? "none" : "sigma2"; }

Weighting weighting_from_string(const std::string& name) {
  if (name == "none") return Weighting::none;
  if (name == "sigma2") return Weighting::sigma2;
  throw std::invalid_argument("unknown objective weighting '" + name + "'");
}

namespace {

struct Prepared {
  Matrix x_t;
  Matrix target;
  Vector weight;
};

Prepared prepare(const ScoreModel& model, const DsmBatch& batch, const VESchedule& sched, double r,
                 Weighting weighting) {
  const Index b = batch.x0.rows();
  if (b < 1) throw std::invalid_argument("dsm: empty batch");
  if (batch.x0.cols() != model.dim() || batch.noise.rows() != b ||
      batch.noise.cols() != model.dim() || batch.t.size() != b) {
    throw std::invalid_argument("dsm: batch shapes disagree with each other or the model");
  }
  if (!(r >= 0.0)) throw std::invalid_argument("dsm: r must be non-negative");

  Prepared p;
  p.x_t.resize(b, model.dim());
  p.target.resize(b, model.dim());
  p.weight.resize(b);
  for (Index i = 0; i < b; ++i) {
    const double sigma = ve_sigma(sched, batch.t(i));
    p.x_t.row(i) = batch.x0.row(i) + sigma * batch.noise.row(i);
    // -(x_t - x0) / sigma^2 written as -z / sigma.
    p.target.row(i) = -batch.noise.row(i) / sigma;
    p.weight(i) = weighting == Weighting::sigma2 ? sigma * sigma : 1.0;
  }
  return p;
}

LossBreakdown assemble(const Matrix& residual, const Vector& weight, double kappa, double r) {
  const Index b = residual.rows();
  double fit = 0.0;
  for (Index i = 0; i < b; ++i) fit += weight(i) * residual.row(i).squaredNorm();
  LossBreakdown out;
  out.fit_term = fit / static_cast<double>(b);
  out.reg_term = r * kappa * kappa;
  out.total = out.fit_term + out.reg_term;
  out.r = r;
  return out;
}

}  // namespace

LossBreakdown dsm_loss(const ScoreModel& model, const DsmBatch& batch, const VESchedule& sched,
                       double r, Weighting weighting) {
  const Prepared p = prepare(model, batch, sched, r, weighting);
  const Matrix s = forward_batch(model, p.x_t, batch.t);
  const Matrix residual = model.kappa() * s - p.target;
  return assemble(residual, p.weight, model.kappa(), r);
}

DsmResult dsm_grad(const ScoreModel& model, const DsmBatch& batch, const VESchedule& sched, double r,
                   Weighting weighting) {
  const Prepared p = prepare(model, batch, sched, r, weighting);
  ForwardCache cache;
  const Matrix s = forward_batch(model, p.x_t, batch.t, &cache);
  const Matrix residual = model.kappa() * s - p.target;

  DsmResult out;
  out.loss = assemble(residual, p.weight, model.kappa(), r);

  // d fit / d(kappa s_i) = 2 w_i (kappa s_i - target_i) / b.
  const double scale = 2.0 / static_cast<double>(batch.x0.rows());
  const Matrix upstream = (residual.array().colwise() * (scale * p.weight).array()).matrix();
  out.grad = backward_batch(model, cache, upstream);
  out.grad.d_kappa += 2.0 * r * model.kappa();
  return out;
}

}  // namespace sparse_score
