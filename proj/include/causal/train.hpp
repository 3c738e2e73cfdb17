#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "causal/corpus.hpp"
#include "causal/embeddings.hpp"
#include "causal/eval.hpp"
#include "causal/neuralnet.hpp"

namespace causal::nn {

enum class Precision { float32, float64 };

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr_decay = 0.75;
  int lr_decay_every = 20;
  double clip_norm = 0.25;
  double dropout = 0.5;  // BiGRU inputs and outputs
  int hidden_size = kDefaultHidden;
  int depth = 1;
  double threshold = eval::kDefaultThreshold;
  Precision precision = Precision::float32;

  // Defaults with the per-dataset batch size (semeval 128, causaltb 32,
  // eventsl 16, biocausal_small 32, biocausal_large 256).
  static TrainConfig for_dataset(std::string_view dataset);

  // lr0 * decay^(floor(epoch / every)), epochs counted from 0.
  double learning_rate(int epoch) const;

  std::vector<std::string> validation_errors() const;

  // key=value lines, stable order; parse accepts any subset of keys and
  // reports unknown ones.
  std::string to_text() const;
  void set(const std::string& key, const std::string& value);
  static bool is_key(const std::string& key);
};

int default_batch_size(std::string_view dataset);

// A sentence mapped to its input vectors (one column per token).
struct EncodedSentence {
  std::string id;
  Eigen::MatrixXf inputs;
  int gold = 0;
};

// Tokenizes and embeds each sentence. With contextual vectors, every
// sentence must have a record of matching length.
std::vector<EncodedSentence> encode_sentences(const std::vector<LabeledSentence>& sents,
                                              const EmbeddingMatrix& matrix,
                                              const ContextualVectorFile* contextual = nullptr);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;  // mean over training examples
  double val_f1 = 0.0;
  double val_auc = 0.0;  // 0 when validation has no positives
  bool best = false;
};

struct TrainResult {
  BiGruAttParams<float> params;  // best validation F1
  int best_epoch = 0;
  double best_val_f1 = -1.0;
  std::vector<EpochRecord> history;
};

// Mini-batch Adam with per-epoch reshuffling, inverted dropout, global-norm
// clipping and step decay. Validation F1 is measured after every epoch and
// the parameters with the highest value (earliest on ties) are returned.
// Throws RuntimeError naming epoch and batch on divergence.
TrainResult train(const std::vector<EncodedSentence>& train_set, const std::vector<EncodedSentence>& validation,
                  const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Dropout off. Probabilities for each sentence, paired with gold labels.
template <typename T>
eval::PredictionSet infer(const BiGruAttParams<T>& params, const std::vector<EncodedSentence>& sentences);

std::string history_tsv(const std::vector<EpochRecord>& history);

}  // namespace causal::nn
