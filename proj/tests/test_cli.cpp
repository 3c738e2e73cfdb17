#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#include "causal/checkpoint.hpp"
#include "causal/error.hpp"
#include "causal/experiment.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace causal;
using namespace causal::cli;
using causal::testing::read_file;
using causal::testing::write_file;

namespace {

const fs::path kFixtures = CAUSAL_FIXTURES;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("causal_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(CAUSAL_DETECT) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Toy corpus, split and config in `dir`; returns the config path.
fs::path toy_experiment(const fs::path& dir, const std::string& model, const std::string& extra = "", int reps = 2) {
  causal::testing::write_toy_corpus(dir);
  std::ostringstream sink;
  if (!fs::exists(dir / "split" / "manifest.json")) cmd_split({dir / "corpus.jsonl", dir / "split", 13, kDefaultRatios}, sink);
  const fs::path cfg = dir / (model + ".cfg");
  write_file(cfg,
             "# toy experiment\n"
             "dataset = toy\n"
             "data = split\n"
             "model = " + model + "\n"
             "embeddings = vectors.txt\n"
             "embeddings_format = text\n"
             "repetitions = " + std::to_string(reps) + "\n"
             "seed_base = 1\n"
             "output = out_" + model + "\n"
             "epochs = 12\n"
             "batch_size = 8\n"
             "hidden_size = 8\n"
             "lr = 0.01\n" + extra);
  return cfg;
}

}  // namespace

TEST_CASE("convert biocausal fixture") {
  const auto dir = scratch("convert");
  std::ostringstream out;
  ConvertOptions o;
  o.source = "biocausal";
  o.inputs = {kFixtures / "biocausal_four.tsv"};
  o.output = dir / "bio.jsonl";
  const auto card = cmd_convert(o, out);
  CHECK(card.n_causal == 2);
  CHECK(card.n_noncausal == 2);
  CHECK(out.str().find("4 total, 2 causal") != std::string::npos);
  CHECK(read_canonical(dir / "bio.jsonl").size() == 4);
  CHECK(fs::exists(dir / "bio.jsonl.card.json"));

  o.subsample = 1;
  std::ostringstream out2;
  const auto sub = cmd_convert(o, out2);
  CHECK(sub.n_noncausal == 1);
  CHECK(sub.subsample_target == 1);
  CHECK(out2.str().find("3 total, 2 causal") != std::string::npos);

  o.source = "wikipedia";
  CHECK_THROWS_AS(cmd_convert(o, out), ValidationError);
}

TEST_CASE("experiment config parsing") {
  const auto dir = scratch("config");
  causal::testing::write_toy_corpus(dir);
  std::ostringstream sink;
  cmd_split({dir / "corpus.jsonl", dir / "split", 13, kDefaultRatios}, sink);
  const auto cfg = parse_experiment_config("dataset=semeval\nmodel=lr_ngrams\ndata=split\n", dir);
  CHECK(cfg.train.batch_size == 128);
  CHECK(cfg.repetitions == 10);
  CHECK(cfg.data == dir / "split");

  try {
    parse_experiment_config("dataset=toy\nmodel=bigruatt\ndata=split\nbatch_size=0\ncolour=red\n", dir);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("batch_size") != std::string::npos);
    CHECK(msg.find("colour") != std::string::npos);
    CHECK(msg.find("embeddings") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_experiment_config("dataset=toy\nmodel=lr_ngrams\ndata=nowhere\n", dir), ValidationError);
}

TEST_CASE("train writes three artifacts per run and is reproducible") {
  const auto dir = scratch("train");
  const auto cfg_path = toy_experiment(dir, "bigruatt");
  auto cfg = load_experiment_config(cfg_path);
  std::ostringstream out;
  cmd_train(cfg, out);
  CHECK(list_runs(cfg.output) == std::vector<std::uint64_t>{1, 2});
  for (const auto seed : {1, 2}) {
    const auto run = cfg.output / "runs" / std::to_string(seed);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(run)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    CHECK(names == std::vector<std::string>{"checkpoint.bin", "history.tsv", "val_metrics.json"});
  }

  // same config, different output and worker count
  const auto first = cfg.output;
  cfg.output = dir / "again";
  cfg.workers = 2;
  cmd_train(cfg, out);
  for (const auto seed : {"1", "2"}) {
    for (const auto* f : {"history.tsv", "val_metrics.json"}) {
      CHECK(read_file(first / "runs" / seed / f) == read_file(cfg.output / "runs" / seed / f));
    }
    // provenance differs (output path, workers); the weights must not
    const auto a = nn::load_checkpoint(first / "runs" / seed / "checkpoint.bin");
    const auto b = nn::load_checkpoint(cfg.output / "runs" / seed / "checkpoint.bin");
    CHECK(a.params.u_att == b.params.u_att);
    CHECK(a.params.forward.w_h == b.params.forward.w_h);
    CHECK(a.params.backward.u_z == b.params.backward.u_z);
    CHECK(a.best_epoch == b.best_epoch);
  }

  auto bad = cfg;
  bad.train.batch_size = 0;
  CHECK_THROWS_AS(cmd_train(bad, out), ValidationError);
}

TEST_CASE("eval summaries match the per-run files") {
  const auto dir = scratch("eval");
  const auto cfg = load_experiment_config(toy_experiment(dir, "bigruatt"));
  std::ostringstream out;
  cmd_train(cfg, out);
  const auto summary = cmd_eval({cfg.output, {}, {}, {}, {}}, out);
  CHECK(fs::exists(cfg.output / "summary.json"));
  CHECK(fs::exists(cfg.output / "summary.md"));
  std::vector<eval::MetricsReport> per_run;
  for (const auto seed : {"1", "2"}) {
    const auto run = cfg.output / "runs" / seed;
    CHECK(fs::exists(run / "predictions.jsonl"));
    const auto m = eval::parse_metrics_json(read_file(run / "test_metrics.json"));
    CHECK(eval::evaluate(eval::read_predictions(run / "predictions.jsonl")).f1 == m.f1);
    per_run.push_back(m);
  }
  const double mean = (per_run[0].f1 + per_run[1].f1) / 2.0;
  const double sd = std::abs(per_run[0].f1 - per_run[1].f1) / std::sqrt(2.0);
  CHECK(summary.f1.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(summary.f1.std == doctest::Approx(sd).epsilon(1e-12));

  fs::remove(cfg.output / "runs" / "2" / "checkpoint.bin");
  try {
    cmd_eval({cfg.output, {}, {}, {}, {}}, out);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("checkpoint.bin") != std::string::npos);
  }
}

TEST_CASE("logistic regression experiment end to end") {
  const auto dir = scratch("lr");
  const auto cfg = load_experiment_config(toy_experiment(dir, "lr_ngrams", "l2 = 1e-6\n", 3));
  std::ostringstream out;
  cmd_train(cfg, out);
  const auto summary = cmd_eval({cfg.output, {}, {}, {}, {}}, out);
  // the causal verbs separate the classes perfectly
  CHECK(summary.f1.mean == 100.0);
  CHECK(summary.auc_pr.mean == 100.0);
  CHECK(summary.f1.std == 0.0);
  CHECK(summary.precision.std == 0.0);
  CHECK(out.str().find("100.00 +-0.00") != std::string::npos);

  std::ostringstream sig;
  const auto r = cmd_sigtest({cfg.output, cfg.output, eval::Metric::auc_pr, 0, 1000, 1}, sig);
  CHECK(r.p_value == 1.0);
  CHECK(sig.str().find("p = 1.0000\n") != std::string::npos);
  CHECK(sig.str().find('*') == std::string::npos);
}

TEST_CASE("significance star rule") {
  CHECK(format_significance(0.049) == "p = 0.0490 *");
  CHECK(format_significance(0.05) == "p = 0.0500 *");
  CHECK(format_significance(0.051) == "p = 0.0510");
  CHECK(format_significance(1.0) == "p = 1.0000");
}

TEST_CASE("tool exit codes") {
  const auto dir = scratch("tool");
  CHECK(run_tool("--help") == 0);
  CHECK(run_tool("") == 1);
  CHECK(run_tool("convert --source wikipedia --input x --output y") == 1);
  CHECK(run_tool("convert --source biocausal --input " + (kFixtures / "biocausal_four.tsv").string() + " --output " +
                 (dir / "b.jsonl").string()) == 0);
  CHECK(run_tool("convert --source semeval --input " + (kFixtures / "semeval_unbalanced.txt").string() +
                 " --output " + (dir / "s.jsonl").string()) == 1);
  CHECK(run_tool("split --input " + (dir / "b.jsonl").string() + " --output " + (dir / "split").string()) == 1);

  const auto cfg = toy_experiment(dir, "bigruatt", "dropout = 1.5\n");
  CHECK(run_tool("train " + cfg.string()) == 1);
  CHECK(run_tool("sigtest " + dir.string() + " " + dir.string()) == 1);

  // an unwritable output location is a runtime failure
  const auto ok = toy_experiment(dir, "lr_ngrams");
  write_file(dir / "out_lr_ngrams", "a file where a directory is expected");
  CHECK(run_tool("train " + ok.string()) == 2);
}
