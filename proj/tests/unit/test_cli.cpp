#include "sparse_score/checkpoint.hpp"
#include "sparse_score_cli/commands.hpp"
#include "sparse_score_cli/config.hpp"
#include "sparse_score_cli/io.hpp"
#include "sparse_score_cli/plot.hpp"
#include "sparse_score_cli/report.hpp"

#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>

using namespace sparse_score;
using namespace sparse_score::cli;
namespace fs = std::filesystem;

namespace {

// Fresh output root per test case, exported through SPARSE_SCORE_OUT.
struct Scratch {
  fs::path root;
  explicit Scratch(const std::string& name) : root(fs::temp_directory_path() / ("sparse_score_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
    ::setenv("SPARSE_SCORE_OUT", root.c_str(), 1);
  }
  ~Scratch() {
    ::unsetenv("SPARSE_SCORE_OUT");
    fs::remove_all(root);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small, fast pipeline on the 3-D toy target.
RunConfig tiny_toy() {
  RunConfig c;
  for (const auto& [k, v] : toy_preset()) c.set(k, v);
  c.set("target.n", "200");
  c.set("net.hidden", "16,16");
  c.set("net.time_feat_dim", "4");
  c.set("train.epochs", "3");
  c.set("train.batch_size", "50");
  c.set("sampler.steps", "10");
  c.set("sampler.chains", "40");
  return c;
}

std::vector<unsigned char> idx_fixture(int samples) {
  std::vector<unsigned char> bytes = {0, 0, 8, 3};
  for (int dim : {samples, 28, 28}) {
    for (int shift = 24; shift >= 0; shift -= 8) bytes.push_back(static_cast<unsigned char>((dim >> shift) & 0xff));
  }
  for (int i = 0; i < samples * 784; ++i) bytes.push_back(static_cast<unsigned char>((i * 7) % 256));
  return bytes;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("config layering and typed access") {
  RunConfig c;
  CHECK(c.integer("train.epochs") == 100);
  CHECK(c.real("schedule.sigma_max") == 25.0);
  CHECK(c.integers("net.hidden") == std::vector<long long>{64, 64, 64});
}

TEST_CASE("config text parsing") {
  RunConfig c;
  c.load_text("# training\ntrain.epochs = 7\n\n  objective.r=0.01  # trailing\nsampler.record = true\n");
  CHECK(c.integer("train.epochs") == 7);
  CHECK(c.real("objective.r") == 0.01);
  CHECK(c.boolean("sampler.record"));
  c.set_assignment("sweep.s=1,2, 4");
  CHECK(c.integers("sweep.s") == std::vector<long long>{1, 2, 4});
  CHECK_THROWS_AS(c.load_text("train.bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(c.load_text("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(c.set("nosection", "1"), ConfigError);
  c.set("train.epochs", "many");
  CHECK_THROWS_AS(c.integer("train.epochs"), ConfigError);
  c.set("sampler.record", "perhaps");
  CHECK_THROWS_AS(c.boolean("sampler.record"), ConfigError);
  CHECK_THROWS_AS(c.load_file("/nonexistent/dir/cfg.txt"), ConfigError);
}

TEST_CASE("config hash") {
  RunConfig a, b;
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16u);
  b.set("output.dir", "elsewhere");
  CHECK(a.hash() == b.hash());
  b.set("train.seed", "3");
  CHECK(a.hash() != b.hash());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("help text lists every key with its default") {
  const std::string help = describe_keys();
  for (const KeySpec& k : key_table()) {
    CHECK(help.find(k.key) != std::string::npos);
    if (!k.default_value.empty()) CHECK(help.find(k.default_value) != std::string::npos);
  }
}

TEST_CASE("csv round trip is bit-equal") {
  Scratch s("csv");
  Matrix m(3, 3);
  m << 0.1, -1e-300, 1.0 / 3.0, 123456789.123, std::numeric_limits<double>::denorm_min(), -0.0, 2.5e10, 7, 1e-5;
  write_csv_matrix(s.root / "m.csv", m, {"x0", "x1", "x2"});
  const Matrix back = read_csv_matrix(s.root / "m.csv");
  REQUIRE(back.rows() == 3);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 3; ++j) CHECK(std::memcmp(&back(i, j), &m(i, j), sizeof(double)) == 0);
  }
  std::ofstream(s.root / "plain.csv") << "1,2\n3,4\n";
  CHECK(read_csv_matrix(s.root / "plain.csv") == (Matrix(2, 2) << 1, 2, 3, 4).finished());
  std::ofstream(s.root / "ragged.csv") << "1,2\n3\n";
  CHECK_THROWS_AS(read_csv_matrix(s.root / "ragged.csv"), IngestError);
  std::ofstream(s.root / "text.csv") << "a,b\n1,x\n";
  CHECK_THROWS_AS(read_csv_matrix(s.root / "text.csv"), IngestError);
  CHECK_THROWS_AS(read_csv_matrix(s.root / "missing.csv"), IngestError);
}

TEST_CASE("csv writer quotes fields") {
  Scratch s("csvw");
  CsvWriter w(s.root / "t.csv", {"name", "value"});
  w.field("a,b").field(1.5).end_row();
  w.field("say \"hi\"").field(2).end_row();
  w.close();
  CHECK(slurp(s.root / "t.csv") == "name,value\n\"a,b\",1.5\n\"say \"\"hi\"\"\",2\n");
  CsvWriter bad(s.root / "no_such_dir" / "t.csv", {"x"});
  bad.field(1).end_row();
  CHECK_THROWS(bad.close());
}

TEST_CASE("idx ingestion") {
  Scratch s("idx");
  const auto bytes = idx_fixture(4);
  write_bytes(s.root / "four.idx", bytes);
  const Matrix m = ingest(s.root / "four.idx", DataFormat::idx);
  REQUIRE(m.rows() == 4);
  REQUIRE(m.cols() == 784);
  CHECK(m.minCoeff() >= 0.0);
  CHECK(m.maxCoeff() <= 1.0);
  CHECK(m(0, 1) == doctest::Approx(7.0 / 255.0));
  CHECK(m(2, 5) == doctest::Approx(((2 * 784 + 5) * 7 % 256) / 255.0));

  write_bytes(s.root / "short.idx", std::vector<unsigned char>(bytes.begin(), bytes.end() - 100));
  CHECK_THROWS_AS(read_idx(s.root / "short.idx"), IngestError);
  write_bytes(s.root / "header.idx", std::vector<unsigned char>(bytes.begin(), bytes.begin() + 6));
  CHECK_THROWS_AS(read_idx(s.root / "header.idx"), IngestError);
  auto wrong = bytes;
  wrong[2] = 0x0d;
  write_bytes(s.root / "float.idx", wrong);
  CHECK_THROWS_AS(read_idx(s.root / "float.idx"), IngestError);
  CHECK(data_format_from_string("csv") == DataFormat::csv);
  CHECK_THROWS(data_format_from_string("parquet"));
}

TEST_CASE("trajectory tensor round trip") {
  Scratch s("traj");
  const VESchedule sched{5.0, 1e-5};
  SamplerOptions o;
  o.steps = 6;
  o.chains = 5;
  o.seed = 4;
  o.record = true;
  const TargetDensity t = TargetDensity::gaussian(Vector::Zero(3), Vector::Ones(3));
  const SampleRun run = langevin_sample(oracle_score(t, sched), sched, 3, o);
  write_trajectories(s.root / "t.bin", run);
  const TrajectoryTensor back = read_trajectories(s.root / "t.bin");
  CHECK(back.steps == 7);
  CHECK(back.chains == 5);
  CHECK(back.dim == 3);
  CHECK(back.seed == 4u);
  CHECK(back.grid == run.grid);
  REQUIRE(back.slices.size() == 7u);
  for (std::size_t k = 0; k < 7; ++k) CHECK(back.slices[k] == run.trajectories[k]);

  const std::string text = slurp(s.root / "t.bin");
  const auto nl = text.find('\n');
  CHECK(text.size() - nl - 1 == 7u * 5u * 3u * sizeof(double));
  std::ofstream(s.root / "cut.bin", std::ios::binary) << text.substr(0, text.size() - 8);
  CHECK_THROWS(read_trajectories(s.root / "cut.bin"));
}

TEST_CASE("output root honours the environment") {
  RunConfig c;
  c.set("output.dir", "configured");
  ::unsetenv("SPARSE_SCORE_OUT");
  CHECK(output_root(c) == fs::path("configured"));
  Scratch s("env");
  CHECK(output_root(c) == s.root);
}

TEST_CASE("report refuses missing artifacts") {
  Scratch s("report");
  RunConfig c;
  RunReport r = begin_run("unit", c);
  CHECK(fs::exists(r.directory / "config.txt"));
  CHECK(r.run_id == "unit-" + c.hash().substr(0, 10));
  r.add_artifact("ghost", "ghost.csv");
  CHECK_THROWS(finish_run(r, c));
  std::ofstream(r.directory / "ghost.csv") << "x\n";
  r.metrics.push_back({"m", {{"s", "2"}, {"bucket", "early"}}, 1.5, 0.25, 9});
  finish_run(r, c);
  const std::string json = slurp(r.directory / "report.json");
  CHECK(json.find("\"ghost\"") != std::string::npos);
  CHECK(metric_to_json(r.metrics[0]) ==
        R"({"metric":"m","params":{"bucket":"early","s":2.0},"seed":9,"stderr":0.25,"value":1.5})");
}

TEST_CASE("train, sample, eval and audit commands") {
  Scratch s("cmds");
  RunConfig c = tiny_toy();
  c.set("train.checkpoint_every", "2");
  const RunReport tr = cmd_train(c);
  for (const char* f : {"checkpoint.json", "checkpoint_epoch2.json", "train_log.csv", "summary.json", "report.json"}) {
    CHECK(fs::exists(tr.directory / f));
  }
  std::string hash;
  const ScoreModel m = load_checkpoint(tr.directory / "checkpoint.json", &hash);
  CHECK(hash == c.hash());
  CHECK(l1_norm(m.theta()) <= c.real("constraint.l1_radius") * (1 + 1e-12));

  const RunReport sr = cmd_sample(c, tr.directory / "checkpoint.json");
  CHECK(read_csv_matrix(sr.directory / "finals.csv").rows() == 40);
  CHECK(fs::exists(sr.directory / "trajectories.bin"));

  RunConfig ec = c;
  ec.set("metrics.n_t", "5");
  ec.set("metrics.n_x", "5");
  ec.set("metrics.n_mc", "50");
  const RunReport er = cmd_eval(ec, tr.directory / "checkpoint.json");
  CHECK(fs::exists(er.directory / "metrics.json"));
  int sparsity = 0;
  for (const MetricRecord& rec : er.metrics) sparsity += rec.metric == "sparsity_error";
  CHECK(sparsity == 9);

  const RunReport ar = cmd_audit(ec, std::nullopt);
  CHECK(fs::exists(ar.directory / "audit.json"));

  RunConfig bad = c;
  bad.set("sampler.steps", "1");
  CHECK_THROWS_AS(cmd_sample(bad, std::nullopt), ConfigError);
}

TEST_CASE("training from an ingested csv") {
  Scratch s("ingest");
  Rng rng = make_stream(1);
  const Matrix data = standard_normal(rng, 120, 3);
  write_csv_matrix(s.root / "data.csv", data, {"a", "b", "c"});
  RunConfig c = tiny_toy();
  c.set("target.data", (s.root / "data.csv").string());
  c.set("target.data_format", "csv");
  const TargetDensity t = build_target(c);
  CHECK(training_data(c, t) == data);
}

TEST_CASE("displacement ratio by hand") {
  std::vector<Matrix> slices(3, Matrix::Zero(2, 3));
  slices[1] << 1, 1, 1, -2, 0, 2;
  slices[2] << 1, 2, 1, -2, 0, 0;
  // |dx0| = 1 + 2 = 3; |dx1| + |dx2| = (1 + 1 + 0 + 2) + (1 + 0 + 0 + 2) = 7
  CHECK(displacement_ratio(slices) == doctest::Approx(3.0 / 7.0));
  CHECK_THROWS(displacement_ratio({slices[0]}));
}

TEST_CASE("zero seeds is a configuration error before any work") {
  Scratch s("sweep0");
  RunConfig c;
  for (const auto& [k, v] : sweep_preset()) c.set(k, v);
  c.set("sweep.seeds", "");
  CHECK_THROWS_AS(cmd_sweep(c), ConfigError);
  CHECK(fs::is_empty(s.root));
  c.set("sweep.seeds", "0");
  c.set("sweep.s", "9");
  CHECK_THROWS_AS(cmd_sweep(c), ConfigError);
  CHECK(fs::is_empty(s.root));
}

TEST_CASE("single-cell sweep equals a manual train and sample chain") {
  Scratch s("sweep1");
  RunConfig c;
  for (const auto& [k, v] : sweep_preset()) c.set(k, v);
  c.set("target.dim", "3");
  c.set("target.n", "150");
  c.set("net.hidden", "16");
  c.set("net.time_feat_dim", "4");
  c.set("train.epochs", "2");
  c.set("train.batch_size", "50");
  c.set("sampler.chains", "60");
  c.set("metrics.n_mc", "80");
  c.set("sweep.r", "0.001");
  c.set("sweep.T", "12");
  c.set("sweep.s", "2");
  c.set("sweep.seeds", "5");
  const SweepOutcome out = cmd_sweep(c);
  REQUIRE(out.cells.size() == 1u);
  REQUIRE(out.cells[0].ok);
  CHECK(out.dominance.empty());

  const RunConfig cell = sweep_cell_config(c, 0.001, 12, 2, 5);
  const RunReport tr = cmd_train(cell);
  const RunReport sr = cmd_sample(cell, tr.directory / "checkpoint.json");
  double manual = -1.0;
  for (const MetricRecord& m : sr.metrics) {
    if (m.metric == "kl_knn") manual = m.value;
  }
  CHECK(manual == out.cells[0].kl);
  CHECK(load_checkpoint(tr.directory / "checkpoint.json").kappa() == out.cells[0].kappa);
}

TEST_CASE("toy with both arms unregularized gives identical panels") {
  Scratch s("toy");
  RunConfig c = tiny_toy();
  c.set("objective.r", "0");
  const ToyOutcome out = cmd_toy(c);
  CHECK(out.baseline.ratio == out.regularized.ratio);
  CHECK(out.baseline.kl == out.regularized.kl);
  CHECK(slurp(out.report.directory / "trajectories_baseline.bin") ==
        slurp(out.report.directory / "trajectories_regularized.bin"));
  const std::string svg = slurp(out.report.directory / "toy.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("baseline") != std::string::npos);

  // Plotting only reads artifacts.
  const std::string before = slurp(out.report.directory / "displacement.csv");
  const ToyPlotInputs in{out.report.directory / "data.csv", out.report.directory / "trajectories_baseline.bin",
                         out.report.directory / "trajectories_regularized.bin"};
  plot_toy_svg(in, s.root / "a.svg");
  plot_toy_svg(in, s.root / "b.svg");
  CHECK(slurp(out.report.directory / "displacement.csv") == before);
  CHECK(slurp(s.root / "a.svg") == slurp(s.root / "b.svg"));
}

TEST_CASE("toy seed change keeps the lineage fields") {
  Scratch s("toyseed");
  RunConfig a = tiny_toy();
  RunConfig b = tiny_toy();
  b.set("sampler.seed", "8");
  const ToyOutcome x = cmd_toy(a);
  const ToyOutcome y = cmd_toy(b);
  CHECK(x.report.revision == y.report.revision);
  CHECK(x.report.command == y.report.command);
  CHECK(x.report.artifacts.size() == y.report.artifacts.size());
  CHECK(x.report.config_hash != y.report.config_hash);
  CHECK(slurp(x.report.directory / "trajectories_regularized.bin") !=
        slurp(y.report.directory / "trajectories_regularized.bin"));
}
