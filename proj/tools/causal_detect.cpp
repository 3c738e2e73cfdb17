// causal-detect: corpus conversion, splitting, training, evaluation and
// significance testing for causal sentence detection.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causal/error.hpp"
#include "causal/experiment.hpp"

namespace {

causal::SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw causal::ValidationError("--ratios: cannot parse '" + part + "'");
    }
  }
  if (v.size() != 3) throw causal::ValidationError("--ratios needs three comma-separated values");
  return {v[0], v[1], v[2]};
}

causal::TimebankRule parse_rule(const std::string& name) {
  if (name == "signal_or_clink") return causal::TimebankRule::signal_or_clink;
  if (name == "signal_and_clink") return causal::TimebankRule::signal_and_clink;
  if (name == "clink_only") return causal::TimebankRule::clink_only;
  if (name == "signal_only") return causal::TimebankRule::signal_only;
  throw causal::ValidationError("unknown --rule '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal sentence detection: BiGRU with self-attention and an n-gram LR baseline"};
  app.require_subcommand(1);

  causal::cli::ConvertOptions convert;
  std::string rule = "signal_or_clink";
  std::size_t subsample = 0;
  auto* convert_cmd = app.add_subcommand("convert", "Parse a source corpus into canonical JSON lines");
  convert_cmd->add_option("--source", convert.source, "semeval | causaltb | eventsl | biocausal")->required();
  convert_cmd->add_option("--input", convert.inputs, "Input file or directory (repeatable)")->required();
  convert_cmd->add_option("--output", convert.output, "Canonical output file")->required();
  auto* subsample_opt = convert_cmd->add_option("--subsample", subsample, "Keep this many non-causal sentences");
  convert_cmd->add_option("--seed", convert.seed, "Subsampling seed")->capture_default_str();
  convert_cmd->add_option("--rule", rule, "CausalTB rule: signal_or_clink | signal_and_clink | clink_only | signal_only")
      ->capture_default_str();

  causal::cli::SplitOptions split;
  std::string ratios = "0.7,0.15,0.15";
  auto* split_cmd = app.add_subcommand("split", "Stratified train/validation/test split");
  split_cmd->add_option("--input", split.input, "Canonical corpus file")->required();
  split_cmd->add_option("--output", split.output, "Output directory")->required();
  split_cmd->add_option("--seed", split.seed, "Shuffling seed")->capture_default_str();
  split_cmd->add_option("--ratios", ratios, "train,validation,test fractions")->capture_default_str();

  std::string config_path;
  unsigned train_workers = 0;
  auto* train_cmd = app.add_subcommand("train", "Train every repetition of an experiment");
  train_cmd->add_option("config", config_path, "Experiment config (key=value)")->required();
  train_cmd->add_option("--workers", train_workers, "Parallel repetitions (overrides the config)");

  causal::cli::EvalOptions evalo;
  std::string eval_test, eval_emb, eval_fmt, eval_ctx;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate every run's checkpoint on the test split");
  eval_cmd->add_option("runs", evalo.runs_dir, "Experiment output directory")->required();
  eval_cmd->add_option("--test", eval_test, "Test split file (default: the experiment's test.jsonl)");
  eval_cmd->add_option("--embeddings", eval_emb, "Override the embedding file");
  eval_cmd->add_option("--embeddings-format", eval_fmt, "text | binary");
  eval_cmd->add_option("--contextual", eval_ctx, "Override the contextual vector file");

  causal::cli::SigtestOptions sig;
  std::string metric = "auc";
  auto* sig_cmd = app.add_subcommand("sigtest", "Approximate randomization test between two experiments");
  sig_cmd->add_option("a", sig.a, "First experiment directory")->required();
  sig_cmd->add_option("b", sig.b, "Second experiment directory")->required();
  sig_cmd->add_option("--metric", metric, "f1 | precision | recall | auc")->capture_default_str();
  sig_cmd->add_option("--seed", sig.seed, "Randomization seed")->capture_default_str();
  sig_cmd->add_option("--iterations", sig.iterations, "Iterations")->capture_default_str();
  sig_cmd->add_option("--workers", sig.workers, "Worker threads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*convert_cmd) {
      if (*subsample_opt) convert.subsample = subsample;
      convert.rule = parse_rule(rule);
      causal::cli::cmd_convert(convert, std::cout);
    } else if (*split_cmd) {
      split.ratios = parse_ratios(ratios);
      causal::cli::cmd_split(split, std::cout);
    } else if (*train_cmd) {
      auto cfg = causal::cli::load_experiment_config(config_path);
      if (train_workers > 0) cfg.workers = train_workers;
      causal::cli::cmd_train(cfg, std::cout);
    } else if (*eval_cmd) {
      if (!eval_test.empty()) evalo.test = eval_test;
      if (!eval_emb.empty()) evalo.embeddings = eval_emb;
      if (!eval_fmt.empty()) evalo.embeddings_format = causal::parse_embedding_format(eval_fmt);
      if (!eval_ctx.empty()) evalo.contextual = eval_ctx;
      causal::cli::cmd_eval(evalo, std::cout);
    } else if (*sig_cmd) {
      sig.metric = causal::eval::parse_metric(metric);
      causal::cli::cmd_sigtest(sig, std::cout);
    }
  } catch (const causal::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
