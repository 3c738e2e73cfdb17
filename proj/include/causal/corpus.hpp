#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace causal {

enum class Label { causal, non_causal };
enum class Source { semeval, causaltb, eventsl, biocausal };

std::string_view to_string(Label label);
std::string_view to_string(Source source);
Label parse_label(std::string_view text);
Source parse_source(std::string_view text);

struct LabeledSentence {
  std::string id;
  std::string text;
  Label label = Label::non_causal;
  Source source = Source::semeval;

  bool is_causal() const { return label == Label::causal; }
  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;
};

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultRatios = {0.70, 0.15, 0.15};
inline constexpr std::uint64_t kDefaultCorpusSeed = 13;

struct CorpusSplit {
  std::vector<LabeledSentence> train;
  std::vector<LabeledSentence> validation;
  std::vector<LabeledSentence> test;
  std::uint64_t seed = kDefaultCorpusSeed;
  SplitRatios ratios = kDefaultRatios;
};

struct DatasetCard {
  std::string name;
  std::size_t n_causal = 0;
  std::size_t n_noncausal = 0;
  std::optional<std::size_t> subsample_target;
};

DatasetCard make_card(std::string name, const std::vector<LabeledSentence>& sents,
                      std::optional<std::size_t> subsample_target = std::nullopt);

// SemEval-2010 Task 8 distribution files: numbered quoted sentence with
// <e1>/<e2> tags, relation line, Comment line, blank separator. Causal iff
// the relation begins with "Cause-Effect".
std::vector<LabeledSentence> parse_semeval(const std::filesystem::path& path);

// How C-SIGNAL and intra-sentence CLINK evidence combine in Causal-TimeBank.
enum class TimebankRule { signal_or_clink, signal_and_clink, clink_only, signal_only };

// Directory of CAT-XML documents (searched recursively for *.xml).
std::vector<LabeledSentence> parse_causal_timebank(
    const std::filesystem::path& dir, TimebankRule rule = TimebankRule::signal_or_clink);
std::vector<LabeledSentence> parse_event_storyline(const std::filesystem::path& dir);

// Delimited text (tab or comma, detected from the header) with a sentence
// column and a binary label column.
std::vector<LabeledSentence> parse_biocausal(const std::filesystem::path& path);

// Keeps every causal sentence and exactly `target` non-causal ones drawn
// uniformly without replacement. Relative order is preserved.
std::vector<LabeledSentence> subsample_negatives(const std::vector<LabeledSentence>& sents,
                                                 std::size_t target, std::uint64_t seed);

CorpusSplit stratified_split(const std::vector<LabeledSentence>& sents,
                             SplitRatios ratios = kDefaultRatios,
                             std::uint64_t seed = kDefaultCorpusSeed);

// Canonical JSON-lines format: one {"id","text","label","source"} object per
// line. Reading rejects duplicate ids.
void write_canonical(const std::vector<LabeledSentence>& sents, const std::filesystem::path& path);
std::vector<LabeledSentence> read_canonical(const std::filesystem::path& path);

// A split is a directory with train.jsonl, validation.jsonl, test.jsonl and
// manifest.json (seed, ratios, per-file counts).
void write_split(const CorpusSplit& split, const std::filesystem::path& dir);
CorpusSplit read_split(const std::filesystem::path& dir);

void write_card(const DatasetCard& card, const std::filesystem::path& path);

}  // namespace causal
