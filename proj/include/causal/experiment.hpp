#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "causal/baselines.hpp"
#include "causal/corpus.hpp"
#include "causal/embeddings.hpp"
#include "causal/train.hpp"

// Command implementations behind the causal-detect tool. Each command
// writes human-readable progress to `out` and throws ValidationError
// (exit 1) or RuntimeError (exit 2) on failure.
namespace causal::cli {

enum class ModelKind { bigruatt, bigruatt_ctx, lr_ngrams };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

// Flat key=value file; '#' starts a comment. Relative paths are resolved
// against the directory holding the file.
//
//   dataset = biocausal_small        # selects the batch-size default
//   data = splits/biocausal          # directory written by `split`
//   model = bigruatt                 # bigruatt | bigruatt_ctx | lr_ngrams
//   embeddings = vectors.bin         # neural models only
//   embeddings_format = binary       # binary | text
//   contextual = elmo.ctx            # bigruatt_ctx only
//   repetitions = 10
//   seed_base = 1
//   output = runs/biocausal
//   workers = 1
//   l2, max_iters, tol               # lr_ngrams solver
//   epochs, batch_size, lr, ...      # any TrainConfig key
struct ExperimentConfig {
  std::string dataset;
  std::filesystem::path data;
  ModelKind model = ModelKind::bigruatt;
  std::filesystem::path embeddings;
  EmbeddingFormat embeddings_format = EmbeddingFormat::binary;
  std::filesystem::path contextual;
  int repetitions = 10;
  std::uint64_t seed_base = 1;
  std::filesystem::path output = "output";
  unsigned workers = 1;
  nn::TrainConfig train;
  lr::FitOptions lr;

  // Normalized key=value rendering (resolved paths, every key).
  std::string to_text() const;
};

// Collects every problem before throwing one ValidationError listing all.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir,
                                         bool check_paths = true);
ExperimentConfig load_experiment_config(const std::filesystem::path& path, bool check_paths = true);

struct ConvertOptions {
  std::string source;  // semeval | causaltb | eventsl | biocausal
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output;
  std::optional<std::size_t> subsample;
  std::uint64_t seed = kDefaultCorpusSeed;
  TimebankRule rule = TimebankRule::signal_or_clink;
};

// Parses, optionally subsamples, writes canonical JSON lines plus a
// <output>.card.json dataset card. Returns the card.
DatasetCard cmd_convert(const ConvertOptions& options, std::ostream& out);

struct SplitOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  std::uint64_t seed = kDefaultCorpusSeed;
  SplitRatios ratios = kDefaultRatios;
};

CorpusSplit cmd_split(const SplitOptions& options, std::ostream& out);

// One run per seed (seed_base + k) under <output>/runs/<seed>/:
// checkpoint.bin, history.tsv, val_metrics.json.
void cmd_train(const ExperimentConfig& config, std::ostream& out);

struct EvalOptions {
  std::filesystem::path runs_dir;  // an experiment output directory
  std::optional<std::filesystem::path> test;
  std::optional<std::filesystem::path> embeddings;
  std::optional<EmbeddingFormat> embeddings_format;
  std::optional<std::filesystem::path> contextual;
};

// Writes predictions.jsonl and test_metrics.json per run, then
// summary.json and summary.md in the experiment directory.
eval::RepetitionSummary cmd_eval(const EvalOptions& options, std::ostream& out);

struct SigtestOptions {
  std::filesystem::path a;
  std::filesystem::path b;
  eval::Metric metric = eval::Metric::auc_pr;
  std::uint64_t seed = 0;
  std::size_t iterations = 10000;
  unsigned workers = 1;
};

eval::SignificanceResult cmd_sigtest(const SigtestOptions& options, std::ostream& out);

// "p = 0.0490 *" when p <= 0.05, without the star otherwise.
std::string format_significance(double p_value);

// Seeds of the run directories under <dir>/runs, ascending.
std::vector<std::uint64_t> list_runs(const std::filesystem::path& dir);

}  // namespace causal::cli
