#include "sparse_score/metrics.hpp"
#include "sparse_score/objective.hpp"
#include "sparse_score/sampler.hpp"
#include "sparse_score/scorenet.hpp"
#include "sparse_score/trainer.hpp"

#include <benchmark/benchmark.h>

using namespace sparse_score;

namespace {

Architecture default_arch(Index d) {
  Architecture a;
  a.dim = d;
  return a;
}

TargetDensity anisotropic() {
  Vector v(3);
  v << 0.08, 1.0, 1.0;
  return TargetDensity::gaussian(Vector::Zero(3), v);
}

void BM_ForwardBatch(benchmark::State& state) {
  const Index n = state.range(0);
  const ScoreModel m = ScoreModel::init(default_arch(3), 0);
  Rng rng = make_stream(1);
  const Matrix x = standard_normal(rng, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(m, x, 0.5));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ForwardBatch)->Arg(1)->Arg(128)->Arg(2000);

void BM_DsmGrad(benchmark::State& state) {
  const Index b = state.range(0);
  const ScoreModel m = ScoreModel::init(default_arch(3), 0);
  Rng rng = make_stream(2);
  DsmBatch batch{standard_normal(rng, b, 3), Vector::LinSpaced(b, 0.01, 1.0), standard_normal(rng, b, 3)};
  const VESchedule sched;
  for (auto _ : state) benchmark::DoNotOptimize(dsm_grad(m, batch, sched, 0.001));
  state.SetItemsProcessed(state.iterations() * b);
}
BENCHMARK(BM_DsmGrad)->Arg(128)->Arg(512);

void BM_TrainEpoch(benchmark::State& state) {
  Rng rng = make_stream(3);
  const Matrix data = sample(anisotropic(), 2000, rng);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.projection = true;
  Constraints c;
  c.l1_radius = 300.0;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, cfg, VESchedule{}, default_arch(3), c));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_ProjectL1(benchmark::State& state) {
  Rng rng = make_stream(4);
  const Vector theta = standard_normal(rng, state.range(0), 1).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(project_l1(theta, 1.0));
}
BENCHMARK(BM_ProjectL1)->Arg(10000)->Arg(100000);

void BM_LangevinOracle(benchmark::State& state) {
  const TargetDensity t = anisotropic();
  const VESchedule sched{1.02, 1e-5};
  SamplerOptions o;
  o.steps = 60;
  o.chains = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(langevin_sample(oracle_score(t, sched), sched, 3, o));
}
BENCHMARK(BM_LangevinOracle)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_KlKnn(benchmark::State& state) {
  const Index n = state.range(0);
  Rng a = make_stream(5), b = make_stream(6);
  const Matrix p = sample(anisotropic(), n, a), q = sample(anisotropic(), n, b);
  for (auto _ : state) benchmark::DoNotOptimize(kl_knn(p, q, 5));
}
BENCHMARK(BM_KlKnn)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
