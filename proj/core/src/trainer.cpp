#include "sparse_score/trainer.hpp"

#include "sparse_score/adam.hpp"
#include "sparse_score/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sparse_score {

void TrainConfig::validate() const {
  if (!(r >= 0.0)) throw std::invalid_argument("train: r must be >= 0");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (!(eps > 0.0 && eps < 0.01)) throw std::invalid_argument("train: eps must lie in (0, 0.01)");
  if (!(kappa_init > 0.0)) throw std::invalid_argument("train: kappa_init must be > 0");
}

TrainConfig TrainConfig::baseline(TrainConfig base) {
  base.r = 0.0;
  base.projection = false;
  base.kappa_trainable = false;
  base.kappa_init = 1.0;
  return base;
}

TrainResult train(const Matrix& data, const TrainConfig& cfg, const VESchedule& sched,
                  const Architecture& arch, const Constraints& constraints,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  sched.validate();
  const Index n = data.rows();
  if (n < cfg.batch_size) {
    throw std::invalid_argument("train: need at least batch_size rows of data");
  }
  if (data.cols() != arch.dim) {
    throw std::invalid_argument("train: data dimension does not match architecture");
  }

  TrainResult result{ScoreModel::init(arch, cfg.seed, cfg.kappa_init, constraints), {}};
  ScoreModel& model = result.model;
  if (cfg.projection) {
    model.theta() = project_l1(model.theta(), constraints.l1_radius);
  }

  Rng rng = make_stream(cfg.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  AdamConfig adam;
  adam.learning_rate = cfg.learning_rate;
  AdamState theta_state(model.param_count());
  AdamState kappa_state(1);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const Index batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  result.history.steps.reserve(static_cast<std::size_t>(cfg.epochs * batches));

  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);

    for (Index bidx = 0; bidx < batches; ++bidx) {
      const Index begin = bidx * cfg.batch_size;
      const Index size = std::min<Index>(cfg.batch_size, n - begin);

      DsmBatch batch;
      batch.x0.resize(size, arch.dim);
      batch.t.resize(size);
      batch.noise.resize(size, arch.dim);
      for (Index i = 0; i < size; ++i) {
        batch.x0.row(i) = data.row(order[static_cast<std::size_t>(begin + i)]);
      }
      for (Index i = 0; i < size; ++i) batch.t(i) = uniform01(rng) * (1.0 - cfg.eps) + cfg.eps;
      for (Index i = 0; i < size; ++i) {
        for (Index j = 0; j < arch.dim; ++j) batch.noise(i, j) = normal(rng);
      }

      DsmResult res = dsm_grad(model, batch, sched, cfg.r, cfg.weighting);
      ++step;
      if (!std::isfinite(res.loss.total) || !res.grad.d_theta.allFinite() ||
          !std::isfinite(res.grad.d_kappa)) {
        std::vector<Index> rows(order.begin() + begin, order.begin() + begin + size);
        std::ostringstream msg;
        msg << "train: non-finite loss at step " << step << " (epoch " << epoch
            << ", kappa = " << model.kappa() << ")";
        throw TrainingError(msg.str(), step, std::move(rows), model.kappa());
      }

      adam_step(model.theta(), res.grad.d_theta, theta_state, adam);
      if (cfg.kappa_trainable) {
        Vector k(1);
        k(0) = model.kappa();
        Vector gk(1);
        gk(0) = res.grad.d_kappa;
        adam_step(k, gk, kappa_state, adam);
        model.set_kappa(std::max(k(0), kKappaFloor));
      }
      if (cfg.projection) {
        model.theta() = project_l1(model.theta(), constraints.l1_radius);
      }
      result.history.steps.push_back({epoch, step, res.loss, model.kappa()});
    }

    result.history.kappa_per_epoch.push_back(model.kappa());
    result.history.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    if (on_epoch) on_epoch(epoch, model);
  }
  return result;
}

}  // namespace sparse_score
