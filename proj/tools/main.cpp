#include "sparse_score/trainer.hpp"
#include "sparse_score_cli/commands.hpp"
#include "sparse_score_cli/io.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace sparse_score;
using namespace sparse_score::cli;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_file, "config file of section.key = value lines");
  cmd->add_option("-s,--set", c.overrides, "override one key, e.g. --set train.epochs=50")->take_all();
}

RunConfig resolve(const Common& c, const std::map<std::string, std::string>& preset) {
  RunConfig cfg;
  for (const auto& [k, v] : preset) cfg.set(k, v);
  if (!c.config_file.empty()) cfg.load_file(c.config_file);
  for (const std::string& o : c.overrides) cfg.set_assignment(o);
  return cfg;
}

void print_report(const RunReport& r) {
  std::cout << "run " << r.run_id << " (config " << r.config_hash << ")\n";
  for (const MetricRecord& m : r.metrics) std::cout << "  " << metric_to_json(m) << "\n";
  std::cout << "report: " << (r.directory / "report.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized sparse score matching: training, sampling and diagnostics"};
  app.footer(describe_keys() + "\nSPARSE_SCORE_OUT, when set, replaces output.dir as the output root.");
  app.require_subcommand(1);

  Common train_opts, sample_opts, eval_opts, sweep_opts, toy_opts, audit_opts;
  std::string sample_ckpt, eval_ckpt, audit_ckpt;
  std::optional<int> steps;
  std::optional<long long> chains, seed;
  bool record = false;

  auto* train_cmd = app.add_subcommand("train", "train a score model and write a checkpoint");
  add_common(train_cmd, train_opts);

  auto* sample_cmd = app.add_subcommand("sample", "Langevin sampling from a checkpoint or the exact score");
  add_common(sample_cmd, sample_opts);
  sample_cmd->add_option("--checkpoint", sample_ckpt, "checkpoint JSON (omit to use the target's exact score)");
  sample_cmd->add_option("--steps", steps, "sampling steps T");
  sample_cmd->add_option("--chains", chains, "number of chains");
  sample_cmd->add_option("--seed", seed, "sampling seed");
  sample_cmd->add_flag("--record", record, "write the trajectory tensor");

  auto* eval_cmd = app.add_subcommand("eval", "score error, sample KL and sparsity profile");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint JSON (omit to evaluate the exact score)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Gaussian-uniform grid over r, T, s and seeds");
  add_common(sweep_cmd, sweep_opts);

  auto* toy_cmd = app.add_subcommand("toy", "3-D toy: baseline vs regularized paths and plot");
  add_common(toy_cmd, toy_opts);

  auto* audit_cmd = app.add_subcommand("audit", "KL bound term audit and tilting identity check");
  add_common(audit_cmd, audit_opts);
  audit_cmd->add_option("--checkpoint", audit_ckpt, "checkpoint JSON (omit to audit the exact score)");

  CLI11_PARSE(app, argc, argv);

  auto opt_path = [](const std::string& p) -> std::optional<std::filesystem::path> {
    if (p.empty()) return std::nullopt;
    return std::filesystem::path(p);
  };

  try {
    if (train_cmd->parsed()) {
      print_report(cmd_train(resolve(train_opts, {})));
    } else if (sample_cmd->parsed()) {
      RunConfig cfg = resolve(sample_opts, {});
      if (steps) cfg.set("sampler.steps", std::to_string(*steps));
      if (chains) cfg.set("sampler.chains", std::to_string(*chains));
      if (seed) cfg.set("sampler.seed", std::to_string(*seed));
      if (record) cfg.set("sampler.record", "true");
      print_report(cmd_sample(cfg, opt_path(sample_ckpt)));
    } else if (eval_cmd->parsed()) {
      print_report(cmd_eval(resolve(eval_opts, {}), opt_path(eval_ckpt)));
    } else if (sweep_cmd->parsed()) {
      const SweepOutcome out = cmd_sweep(resolve(sweep_opts, sweep_preset()));
      print_report(out.report);
      for (const DominanceRow& row : out.dominance) {
        std::cout << "T=" << row.T << " s=" << row.s << " r=" << row.r << "  baseline " << row.baseline.mean_kl
                  << " +- " << row.baseline.stderr_kl << "  regularized " << row.regularized.mean_kl << " +- "
                  << row.regularized.stderr_kl << (row.strictly_lower ? "  lower" : "") << "\n";
      }
    } else if (toy_cmd->parsed()) {
      const ToyOutcome out = cmd_toy(resolve(toy_opts, toy_preset()));
      print_report(out.report);
    } else if (audit_cmd->parsed()) {
      print_report(cmd_audit(resolve(audit_opts, {}), opt_path(audit_ckpt)));
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
