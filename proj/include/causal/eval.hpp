#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace causal::eval {

struct PredictionRecord {
  std::string id;
  double probability = 0.0;
  int gold = 0;  // 1 = causal

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

// Ids unique, probabilities finite and within [0, 1], gold in {0, 1}.
class PredictionSet {
 public:
  PredictionSet() = default;
  explicit PredictionSet(std::vector<PredictionRecord> records);

  const std::vector<PredictionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t positives() const;

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;

 private:
  std::vector<PredictionRecord> records_;
};

inline constexpr double kDefaultThreshold = 0.5;

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Percentages. Causal is the positive class; a probability >= threshold is
// a positive decision. Undefined ratios are 0.
Prf prf1(const PredictionSet& preds, double threshold = kDefaultThreshold);

// Average precision in [0, 100]: records sorted by descending probability,
// ties by ascending id; sum of precision@k over positive ranks / positives.
// Throws ValidationError when there is no positive record.
double auc_pr(const PredictionSet& preds);

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc_pr = 0.0;
  double threshold = kDefaultThreshold;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

MetricsReport evaluate(const PredictionSet& preds, double threshold = kDefaultThreshold);

enum class Metric { f1, precision, recall, auc_pr };

Metric parse_metric(std::string_view name);
std::string_view to_string(Metric metric);
double metric_value(const PredictionSet& preds, Metric metric, double threshold = kDefaultThreshold);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation
};

struct RepetitionSummary {
  MeanStd precision, recall, f1, auc_pr;
  std::vector<MetricsReport> runs;
};

MeanStd mean_std(const std::vector<double>& values);

// Requires at least two runs.
RepetitionSummary aggregate(const std::vector<MetricsReport>& runs);

struct SignificanceResult {
  double p_value = 1.0;
  double observed_delta = 0.0;
  std::size_t iterations = 0;
  double swap_fraction = 0.5;
  Metric metric = Metric::auc_pr;
  std::string selection_note;

  bool significant(double alpha = 0.05) const { return p_value <= alpha; }
};

struct RandomizationOptions {
  std::size_t iterations = 10000;
  double swap_fraction = 0.5;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double threshold = kDefaultThreshold;
};

// Two-tailed approximate randomization. Iteration i draws its swap pattern
// from a generator seeded with mix_seed(seed, i), so results do not depend
// on the worker count. p = (#{delta* >= delta} + 1) / (iterations + 1).
SignificanceResult approx_randomization(const PredictionSet& a, const PredictionSet& b, Metric metric,
                                        const RandomizationOptions& options = {});

struct RunSummary {
  std::uint64_t seed = 0;
  double validation_f1 = 0.0;
};

// Highest validation F1; ties go to the lowest seed.
std::size_t select_best_run(const std::vector<RunSummary>& runs);

// JSON-lines {"id","probability","gold"}.
void write_predictions(const PredictionSet& preds, const std::filesystem::path& path);
PredictionSet read_predictions(const std::filesystem::path& path);

// Stable field names: precision, recall, f1, auc_pr, threshold, n_pos, n_neg.
std::string metrics_json(const MetricsReport& report);
MetricsReport parse_metrics_json(const std::string& text);

// Table row "F1 P R AUC" in mean +- std form, and a JSON document with the
// per-run records.
std::string summary_table(const std::string& label, const RepetitionSummary& summary);
std::string summary_json(const RepetitionSummary& summary);

}  // namespace causal::eval
