#include "sparse_score_cli/commands.hpp"

#include "sparse_score/checkpoint.hpp"
#include "sparse_score_cli/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace sparse_score::cli {

namespace {

Vector broadcast(const std::string& key, const std::string& text, Index d) {
  const std::vector<double> v = parse_reals(key, text);
  if (v.size() == 1) return Vector::Constant(d, v[0]);
  if (static_cast<Index>(v.size()) != d) {
    throw ConfigError("config: " + key + " needs 1 or " + std::to_string(d) + " values, got " +
                      std::to_string(v.size()));
  }
  return Eigen::Map<const Vector>(v.data(), d);
}

Vector broadcast(const RunConfig& cfg, const std::string& key, Index d) {
  return broadcast(key, cfg.str(key), d);
}

std::vector<std::string> split_semicolon(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ';')) out.push_back(item);
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << '\n';
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

nlohmann::json records_json(const std::vector<MetricRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const MetricRecord& r : records) arr.push_back(nlohmann::json::parse(metric_to_json(r)));
  return arr;
}

void write_train_log(const std::filesystem::path& path, const TrainHistory& h) {
  CsvWriter w(path, {"epoch", "step", "fit_term", "reg_term", "total", "kappa"});
  for (const StepRecord& s : h.steps) {
    w.field(s.epoch).field(s.step).field(s.loss.fit_term).field(s.loss.reg_term).field(s.loss.total).field(s.kappa);
    w.end_row();
  }
  w.close();
}

std::vector<std::string> coord_header(Index d) {
  std::vector<std::string> h;
  for (Index j = 0; j < d; ++j) h.push_back("x" + std::to_string(j));
  return h;
}

TrainResult run_training(const RunConfig& cfg, const Matrix& data, const EpochCallback& on_epoch = {}) {
  const VESchedule sched = build_schedule(cfg);
  const Architecture arch = build_architecture(cfg, data.cols());
  try {
    return train(data, build_train_config(cfg), sched, arch, build_constraints(cfg), on_epoch);
  } catch (const TrainingError& e) {
    throw TrainingError(std::string(e.what()) + " [config " + cfg.hash() + "]", e.step(), e.batch_indices(),
                        e.kappa());
  }
}

bool has_data_file(const RunConfig& cfg) { return !cfg.str("target.data").empty(); }

}  // namespace

TargetDensity build_target(const RunConfig& cfg) {
  const long long dim = cfg.integer("target.dim");
  if (dim < 1) throw ConfigError("config: target.dim must be >= 1");
  const Index d = static_cast<Index>(dim);
  try {
    switch (target_kind_from_string(cfg.str("target.kind"))) {
      case TargetKind::gaussian:
        return TargetDensity::gaussian(broadcast(cfg, "target.mean", d), broadcast(cfg, "target.var", d));
      case TargetKind::gaussian_mixture: {
        const std::vector<double> w = cfg.reals("target.mixture_weights");
        const auto means = split_semicolon(cfg.str("target.mixture_means"));
        const auto vars = split_semicolon(cfg.str("target.mixture_vars"));
        if (means.size() != w.size() || vars.size() != w.size()) {
          throw ConfigError("config: mixture weights, means and vars must list the same number of components");
        }
        std::vector<MixtureComponent> comps;
        for (std::size_t k = 0; k < w.size(); ++k) {
          comps.push_back({w[k], broadcast("target.mixture_means", means[k], d),
                           broadcast("target.mixture_vars", vars[k], d)});
        }
        return TargetDensity::mixture(std::move(comps));
      }
      case TargetKind::gaussian_uniform_product: {
        std::vector<int> coords;
        for (long long c : cfg.integers("target.gaussian_coords")) coords.push_back(static_cast<int>(c));
        return TargetDensity::gaussian_uniform(std::move(coords), broadcast(cfg, "target.mean", d),
                                               broadcast(cfg, "target.var", d), broadcast(cfg, "target.lower", d),
                                               broadcast(cfg, "target.upper", d));
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: target: ") + e.what());
  }
  throw ConfigError("config: unsupported target.kind");
}

VESchedule build_schedule(const RunConfig& cfg) {
  VESchedule s{cfg.real("schedule.sigma_max"), cfg.real("schedule.eps")};
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: schedule: ") + e.what());
  }
  return s;
}

Architecture build_architecture(const RunConfig& cfg, Index dim) {
  Architecture a;
  a.dim = dim;
  a.hidden.clear();
  for (long long w : cfg.integers("net.hidden")) a.hidden.push_back(static_cast<Index>(w));
  a.time_feat_dim = static_cast<Index>(cfg.integer("net.time_feat_dim"));
  a.fourier_scale = cfg.real("net.fourier_scale");
  try {
    a.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: net: ") + e.what());
  }
  return a;
}

Constraints build_constraints(const RunConfig& cfg) {
  Constraints c;
  c.l1_radius = cfg.real("constraint.l1_radius");
  c.output_l1_cap = cfg.real("constraint.output_l1_cap");
  c.output_cap = cfg.boolean("constraint.output_cap");
  if (!(c.l1_radius > 0.0)) throw ConfigError("config: constraint.l1_radius must be > 0");
  if (!(c.output_l1_cap > 0.0)) throw ConfigError("config: constraint.output_l1_cap must be > 0");
  return c;
}

TrainConfig build_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.r = cfg.real("objective.r");
  t.epochs = static_cast<int>(cfg.integer("train.epochs"));
  t.batch_size = static_cast<int>(cfg.integer("train.batch_size"));
  t.learning_rate = cfg.real("train.learning_rate");
  t.eps = cfg.real("schedule.eps");
  t.seed = cfg.seed("train.seed");
  t.projection = cfg.boolean("train.projection");
  t.kappa_init = cfg.real("train.kappa_init");
  t.kappa_trainable = cfg.boolean("train.kappa_trainable");
  try {
    t.weighting = weighting_from_string(cfg.str("objective.weighting"));
    t.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return t;
}

SamplerOptions build_sampler_options(const RunConfig& cfg) {
  SamplerOptions o;
  o.steps = static_cast<int>(cfg.integer("sampler.steps"));
  o.chains = static_cast<Index>(cfg.integer("sampler.chains"));
  o.seed = cfg.seed("sampler.seed");
  o.record = cfg.boolean("sampler.record");
  o.snr = cfg.real("sampler.snr");
  if (o.steps < 2) throw ConfigError("config: sampler.steps must be >= 2");
  if (o.chains < 1) throw ConfigError("config: sampler.chains must be >= 1");
  return o;
}

Matrix training_data(const RunConfig& cfg, const TargetDensity& target) {
  if (has_data_file(cfg)) {
    DataFormat format = DataFormat::csv;
    try {
      format = data_format_from_string(cfg.str("target.data_format"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: target.data_format: ") + e.what());
    }
    Matrix m = ingest(cfg.str("target.data"), format);
    if (m.cols() != target.dim()) {
      throw IngestError("ingest: " + cfg.str("target.data") + " has " + std::to_string(m.cols()) +
                        " columns but target.dim is " + std::to_string(target.dim()));
    }
    return m;
  }
  const long long n = cfg.integer("target.n");
  if (n < 1) throw ConfigError("config: target.n must be >= 1");
  Rng rng = make_stream(cfg.seed("target.data_seed"), 0xda7a);
  return sample(target, static_cast<Index>(n), rng);
}

MetricRecord sample_kl(const RunConfig& cfg, const TargetDensity& target, const Matrix& samples) {
  MetricRecord rec;
  rec.seed = cfg.seed("metrics.seed");
  rec.params["n"] = std::to_string(samples.rows());
  if (target.kind() == TargetKind::gaussian) {
    rec.metric = "kl_moment_gaussian";
    rec.value = kl_gaussian_moments(samples, target);
    return rec;
  }
  const int k = static_cast<int>(cfg.integer("metrics.knn_k"));
  const Index m = static_cast<Index>(cfg.integer("metrics.n_mc"));
  Rng rng = make_stream(rec.seed, 0xa0d1);
  const Matrix reference = sample(target, m, rng);
  rec.metric = "kl_knn";
  rec.params["k"] = std::to_string(k);
  rec.params["reference_n"] = std::to_string(m);
  rec.value = kl_knn(reference, samples, k);
  return rec;
}

double displacement_ratio(const std::vector<Matrix>& trajectories) {
  if (trajectories.size() < 2 || trajectories.front().cols() < 3) {
    throw std::invalid_argument("displacement_ratio: need >= 2 slices of dimension >= 3");
  }
  double along = 0.0;
  double across = 0.0;
  for (std::size_t k = 1; k < trajectories.size(); ++k) {
    const Matrix step = (trajectories[k] - trajectories[k - 1]).cwiseAbs();
    along += step.col(0).sum();
    across += step.col(1).sum() + step.col(2).sum();
  }
  return along / across;
}

RunReport cmd_train(const RunConfig& cfg) {
  const TargetDensity target = build_target(cfg);
  build_train_config(cfg);
  const long long every = cfg.integer("train.checkpoint_every");
  if (every < 0) throw ConfigError("config: train.checkpoint_every must be >= 0");

  RunReport report = begin_run("train", cfg);
  const Matrix data = training_data(cfg, target);

  EpochCallback on_epoch;
  if (every > 0) {
    on_epoch = [&](int epoch, const ScoreModel& model) {
      if (epoch % every != 0) return;
      const std::string name = "checkpoint_epoch" + std::to_string(epoch) + ".json";
      save_checkpoint(report.path(name), model, report.config_hash);
      report.add_artifact("checkpoint_epoch" + std::to_string(epoch), name);
    };
  }
  const TrainResult res = run_training(cfg, data, on_epoch);

  save_checkpoint(report.path("checkpoint.json"), res.model, report.config_hash);
  report.add_artifact("checkpoint", "checkpoint.json");
  write_train_log(report.path("train_log.csv"), res.history);
  report.add_artifact("train_log", "train_log.csv");

  const LossBreakdown last = res.history.steps.back().loss;
  const std::uint64_t seed = cfg.seed("train.seed");
  report.metrics.push_back({"kappa_hat", {{"r", format_double(last.r)}}, res.model.kappa(), 0.0, seed});
  report.metrics.push_back({"final_fit_term", {}, last.fit_term, 0.0, seed});
  report.metrics.push_back({"final_total_loss", {}, last.total, 0.0, seed});

  double secs = 0.0;
  for (double s : res.history.epoch_seconds) secs += s;
  write_json(report.path("summary.json"), {{"kappa_hat", res.model.kappa()},
                                           {"fit_term", last.fit_term},
                                           {"reg_term", last.reg_term},
                                           {"total", last.total},
                                           {"l1_norm", l1_norm(res.model.theta())},
                                           {"steps", res.history.steps.size()},
                                           {"train_seconds", secs},
                                           {"seed", seed},
                                           {"config_hash", report.config_hash},
                                           {"config", nlohmann::json(cfg.values())}});
  report.add_artifact("summary", "summary.json");
  finish_run(report, cfg);
  return report;
}

RunReport cmd_sample(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint) {
  const SamplerOptions opts = build_sampler_options(cfg);
  const VESchedule sched = build_schedule(cfg);
  std::optional<ScoreModel> model;
  if (checkpoint) model = load_checkpoint(*checkpoint);
  std::optional<TargetDensity> target;
  if (!model || !has_data_file(cfg)) target = build_target(cfg);
  const Index d = model ? model->dim() : target->dim();

  RunReport report = begin_run("sample", cfg);
  const ScoreFn score = model ? model_score(*model) : oracle_score(*target, sched);
  const SampleRun run = langevin_sample(score, sched, d, opts);

  write_csv_matrix(report.path("finals.csv"), run.finals, coord_header(d));
  report.add_artifact("finals", "finals.csv");
  if (run.recorded()) {
    write_trajectories(report.path("trajectories.bin"), run);
    report.add_artifact("trajectories", "trajectories.bin");
  }
  report.metrics.push_back({"failed_chains", {{"steps", std::to_string(opts.steps)}},
                            static_cast<double>(run.failures.size()), 0.0, opts.seed});
  if (target && target->dim() == d) {
    MetricRecord kl = sample_kl(cfg, *target, run.finals);
    kl.params["steps"] = std::to_string(opts.steps);
    kl.params["score"] = model ? "model" : "oracle";
    report.metrics.push_back(kl);
  }
  finish_run(report, cfg);
  return report;
}

RunReport cmd_eval(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint) {
  const TargetDensity target = build_target(cfg);
  const VESchedule sched = build_schedule(cfg);
  const SamplerOptions opts = build_sampler_options(cfg);
  std::optional<ScoreModel> model;
  if (checkpoint) {
    model = load_checkpoint(*checkpoint);
    if (model->dim() != target.dim()) throw ConfigError("eval: checkpoint dimension differs from target.dim");
  }
  RunReport report = begin_run("eval", cfg);
  const std::uint64_t seed = cfg.seed("metrics.seed");
  const ScoreFn score = model ? model_score(*model) : oracle_score(target, sched);
  const std::string source = model ? "model" : "oracle";

  if (model) report.metrics.push_back({"kappa_hat", {}, model->kappa(), 0.0, seed});
  const int n_t = static_cast<int>(cfg.integer("metrics.n_t"));
  const int n_x = static_cast<int>(cfg.integer("metrics.n_x"));
  const Estimate err = score_error(score, target, sched, n_t, n_x, seed);
  report.metrics.push_back({"score_error",
                            {{"n_t", std::to_string(n_t)}, {"n_x", std::to_string(n_x)}, {"score", source}},
                            err.value, err.std_error, seed});

  const SampleRun run = langevin_sample(score, sched, target.dim(), opts);
  MetricRecord kl = sample_kl(cfg, target, run.finals);
  kl.params["steps"] = std::to_string(opts.steps);
  kl.params["score"] = source;
  report.metrics.push_back(kl);

  std::vector<int> levels;
  for (long long s : cfg.integers("metrics.sparsity_levels")) levels.push_back(static_cast<int>(s));
  if (levels.empty()) {
    for (Index s = 1; s <= target.dim(); ++s) levels.push_back(static_cast<int>(s));
  }
  const int n_mc = static_cast<int>(cfg.integer("metrics.n_mc"));
  for (TimeBucket b : {TimeBucket::all, TimeBucket::early, TimeBucket::late}) {
    const SparsityProfile p = sparsity_profile(target, levels, sched, b, n_mc, seed);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      report.metrics.push_back({"sparsity_error",
                                {{"s", std::to_string(levels[k])}, {"bucket", to_string(b)}},
                                p.errors[k], 0.0, seed});
    }
  }

  write_json(report.path("metrics.json"), records_json(report.metrics));
  report.add_artifact("metrics", "metrics.json");
  finish_run(report, cfg);
  return report;
}

RunReport cmd_audit(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint) {
  const TargetDensity target = build_target(cfg);
  const VESchedule sched = build_schedule(cfg);
  std::optional<ScoreModel> model;
  if (checkpoint) model = load_checkpoint(*checkpoint);

  AuditInputs in;
  in.score = model ? model_score(*model) : oracle_score(target, sched);
  in.kappa = model ? model->kappa() : 1.0;
  in.r = cfg.real("objective.r");
  in.T = static_cast<int>(cfg.integer("sampler.steps"));
  const long long s = cfg.integer("metrics.s");
  in.s = s > 0 ? static_cast<int>(s) : static_cast<int>(target.dim());
  in.B = cfg.real("metrics.B");
  in.n_mc = static_cast<int>(cfg.integer("metrics.n_mc"));
  in.seed = cfg.seed("metrics.seed");

  const int tilt_T = static_cast<int>(cfg.integer("metrics.tilting_T"));
  if (tilt_T < 1) throw ConfigError("config: metrics.tilting_T must be >= 1");

  RunReport report = begin_run("audit", cfg);
  const BoundAudit a = bound_audit(in, target, sched);

  // Tilting identity on the first coordinate's Gaussian (standard normal for
  // other target kinds).
  double mu = 0.0;
  double v = 1.0;
  if (target.kind() == TargetKind::gaussian) {
    mu = target.mean()(0);
    v = target.var()(0);
  }
  const TargetDensity one_d = TargetDensity::gaussian(Vector::Constant(1, mu), Vector::Constant(1, v));
  const DiscreteSchedule disc = make_discrete(tilt_T);
  double worst_exact = 0.0;
  double least_perturbed = std::numeric_limits<double>::infinity();
  const double x_t = mu + 0.5;
  for (int t = 1; t <= tilt_T; ++t) {
    const auto [pm, psd] = reverse_posterior(one_d, disc, t, x_t);
    std::vector<double> grid(41);
    for (int i = 0; i < 41; ++i) grid[static_cast<std::size_t>(i)] = pm + psd * (-4.0 + 0.2 * i);
    worst_exact = std::max(worst_exact, tilting_residual(one_d, disc, t, grid, x_t));
    least_perturbed = std::min(least_perturbed, tilting_residual(one_d, disc, t, grid, x_t, 0.1));
  }

  const std::uint64_t seed = in.seed;
  const std::map<std::string, std::string> tp = {{"T", std::to_string(in.T)}, {"s", std::to_string(a.s)}};
  report.metrics.push_back({"bound_init_term", tp, a.init_term, 0.0, seed});
  report.metrics.push_back({"bound_reverse_term", tp, a.reverse_term, 0.0, seed});
  report.metrics.push_back({"bound_estimation_term", tp, a.estimation_term, 0.0, seed});
  report.metrics.push_back({"bound_computed_sum", tp, a.computed_sum, 0.0, seed});
  report.metrics.push_back({"kl_measured", {{"estimator", a.kl_estimator}}, a.kl_measured, 0.0, seed});
  report.metrics.push_back({"tilting_residual_exact_max", {{"T", std::to_string(tilt_T)}}, worst_exact, 0.0, 0});
  report.metrics.push_back(
      {"tilting_residual_perturbed_min", {{"T", std::to_string(tilt_T)}, {"shift", "0.1"}}, least_perturbed, 0.0, 0});

  write_json(report.path("audit.json"),
             {{"T", a.T},
              {"s", a.s},
              {"B", a.B},
              {"B_estimated", a.B_estimated},
              {"second_moment", a.second_moment},
              {"init_term", a.init_term},
              {"reverse_term", a.reverse_term},
              {"estimation_term", a.estimation_term},
              {"computed_sum", a.computed_sum},
              {"kl_measured", a.kl_measured},
              {"kl_estimator", a.kl_estimator},
              {"bound_holds_on_computed_terms", a.kl_measured <= a.computed_sum},
              {"unresolved", a.unresolved},
              {"tilting", {{"T", tilt_T}, {"exact_max", worst_exact}, {"perturbed_min", least_perturbed}}}});
  report.add_artifact("audit", "audit.json");
  finish_run(report, cfg);
  return report;
}

}  // namespace sparse_score::cli
