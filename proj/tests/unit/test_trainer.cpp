#include "sparse_score/checkpoint.hpp"
#include "sparse_score/metrics.hpp"
#include "sparse_score/sampler.hpp"
#include "sparse_score/target.hpp"
#include "sparse_score/trainer.hpp"

#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <limits>

using namespace sparse_score;

namespace {

const VESchedule kSched{1.02, 1e-5};

TargetDensity anisotropic() {
  Vector v(3);
  v << 0.08, 1.0, 1.0;
  return TargetDensity::gaussian(Vector::Zero(3), v);
}

Matrix toy_data(Index n) {
  Rng rng = make_stream(0, 0xda7a);
  return sample(anisotropic(), n, rng);
}

Architecture small_arch() {
  Architecture a;
  a.dim = 3;
  a.hidden = {32, 32};
  a.time_feat_dim = 8;
  a.fourier_scale = 1.0;
  return a;
}

TrainConfig regularized(double r, int epochs) {
  TrainConfig c;
  c.r = r;
  c.epochs = epochs;
  c.projection = true;
  c.kappa_init = 30.0;
  return c;
}

Constraints wide(double cap) {
  Constraints c;
  c.l1_radius = 300.0;
  c.output_l1_cap = cap;
  return c;
}

}  // namespace

TEST_CASE("training is bit-reproducible") {
  const Matrix data = toy_data(500);
  const TrainConfig cfg = regularized(0.001, 3);
  const TrainResult a = train(data, cfg, kSched, small_arch(), wide(0.3));
  const TrainResult b = train(data, cfg, kSched, small_arch(), wide(0.3));
  CHECK(checkpoint_to_json(a.model) == checkpoint_to_json(b.model));
  TrainConfig other = cfg;
  other.seed = 1;
  CHECK(checkpoint_to_json(train(data, other, kSched, small_arch(), wide(0.3)).model) !=
        checkpoint_to_json(a.model));
}

TEST_CASE("history has one record per step") {
  const Matrix data = toy_data(300);
  TrainConfig cfg = regularized(0.001, 4);
  cfg.batch_size = 128;
  const TrainResult res = train(data, cfg, kSched, small_arch(), wide(0.3));
  CHECK(res.history.steps.size() == 4u * 3u);
  CHECK(res.history.kappa_per_epoch.size() == 4u);
  CHECK(res.history.epoch_seconds.size() == 4u);
  CHECK(res.history.steps.back().epoch == 4);
  CHECK(res.history.kappa_per_epoch.back() == res.model.kappa());
}

TEST_CASE("projection holds after every step") {
  const Matrix data = toy_data(256);
  TrainConfig cfg = regularized(0.001, 40);
  cfg.batch_size = 256;  // one step per epoch, so the callback sees every step
  cfg.learning_rate = 0.01;
  Constraints c;
  c.l1_radius = 1.0;
  int seen = 0;
  train(data, cfg, kSched, small_arch(), c, [&](int, const ScoreModel& m) {
    ++seen;
    CHECK(l1_norm(m.theta()) <= 1.0 + 1e-12);
  });
  CHECK(seen == 40);
}

TEST_CASE("kappa stays above its floor under a huge penalty") {
  const Matrix data = toy_data(256);
  TrainConfig cfg = regularized(1e6, 5);
  cfg.kappa_init = 1e-3;
  cfg.learning_rate = 0.1;
  const TrainResult res = train(data, cfg, kSched, small_arch(), wide(0.3));
  for (double k : res.history.kappa_per_epoch) CHECK(k >= kKappaFloor);
}

TEST_CASE("baseline keeps kappa frozen at one") {
  const Matrix data = toy_data(256);
  const TrainConfig cfg = TrainConfig::baseline(regularized(0.5, 3));
  CHECK(cfg.r == 0.0);
  CHECK_FALSE(cfg.projection);
  const TrainResult res = train(data, cfg, kSched, small_arch(), wide(0.3));
  for (double k : res.history.kappa_per_epoch) CHECK(k == 1.0);
  for (const StepRecord& s : res.history.steps) CHECK(s.loss.reg_term == 0.0);
}

TEST_CASE("training reduces the score error") {
  const Matrix data = toy_data(2000);
  const TargetDensity target = anisotropic();
  const TrainConfig cfg = regularized(0.001, 60);
  Architecture a = small_arch();
  a.hidden = {64, 64, 64};
  a.time_feat_dim = 16;
  double first = -1.0, last = -1.0;
  double first_fit = 0.0, last_fit = 0.0;
  const TrainResult res = train(data, cfg, kSched, a, wide(0.3), [&](int epoch, const ScoreModel& m) {
    if (epoch != 1 && epoch != cfg.epochs) return;
    const double e = score_error(model_score(m), target, kSched, 50, 40, 3).value;
    (epoch == 1 ? first : last) = e;
  });
  const auto& steps = res.history.steps;
  const std::size_t tenth = steps.size() / 10;
  for (std::size_t i = 0; i < tenth; ++i) {
    first_fit += steps[i].loss.fit_term;
    last_fit += steps[steps.size() - 1 - i].loss.fit_term;
  }
  CHECK(last_fit < first_fit);
  CHECK(std::isfinite(last));
  CHECK(last > 0.0);
  CHECK(last * 10.0 <= first);
}

TEST_CASE("kappa shrinks with a stronger penalty") {
  const Matrix data = toy_data(1000);
  const double weak = train(data, regularized(1e-4, 40), kSched, small_arch(), wide(0.3)).model.kappa();
  const double strong = train(data, regularized(1e-2, 40), kSched, small_arch(), wide(0.3)).model.kappa();
  CHECK(strong <= weak);
}

TEST_CASE("non-finite loss raises TrainingError") {
  Matrix data = toy_data(256);
  data(7, 1) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg = regularized(0.001, 2);
  cfg.batch_size = 256;
  try {
    train(data, cfg, kSched, small_arch(), wide(0.3));
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.step() == 1);
    CHECK(e.batch_indices().size() == 256u);
    CHECK(e.kappa() == 30.0);
  }
}

TEST_CASE("train config validation") {
  const Matrix data = toy_data(64);
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(data, cfg, kSched, small_arch()), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train(data, cfg, kSched, small_arch()), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.eps = 0.02;
  CHECK_THROWS_AS(train(data, cfg, kSched, small_arch()), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.r = -1.0;
  CHECK_THROWS_AS(train(data, cfg, kSched, small_arch()), std::invalid_argument);
  cfg = TrainConfig{};
  CHECK_THROWS_AS(train(data, cfg, kSched, small_arch()), std::invalid_argument);  // 64 rows < batch 128
  cfg.batch_size = 16;
  CHECK_THROWS_AS(train(Matrix::Zero(64, 2), cfg, kSched, small_arch()), std::invalid_argument);
}
