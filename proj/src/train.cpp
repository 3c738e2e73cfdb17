#include "causal/train.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "causal/error.hpp"
#include "causal/optim.hpp"
#include "causal/text.hpp"

namespace causal::nn {

int default_batch_size(std::string_view dataset) {
  static const std::map<std::string, int, std::less<>> sizes = {
      {"semeval", 128}, {"causaltb", 32}, {"eventsl", 16}, {"biocausal_small", 32}, {"biocausal_large", 256},
  };
  const auto it = sizes.find(dataset);
  return it == sizes.end() ? 32 : it->second;
}

TrainConfig TrainConfig::for_dataset(std::string_view dataset) {
  TrainConfig c;
  c.batch_size = default_batch_size(dataset);
  return c;
}

double TrainConfig::learning_rate(int epoch) const {
  return lr * std::pow(lr_decay, static_cast<double>(epoch / lr_decay_every));
}

std::vector<std::string> TrainConfig::validation_errors() const {
  std::vector<std::string> errs;
  if (epochs <= 0) errs.push_back("epochs must be positive");
  if (batch_size <= 0) errs.push_back("batch_size must be positive");
  if (!(lr > 0.0)) errs.push_back("lr must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) errs.push_back("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) errs.push_back("beta2 must lie in (0, 1)");
  if (!(eps > 0.0)) errs.push_back("eps must be positive");
  if (!(lr_decay > 0.0)) errs.push_back("lr_decay must be positive");
  if (lr_decay_every <= 0) errs.push_back("lr_decay_every must be positive");
  if (!(clip_norm > 0.0)) errs.push_back("clip_norm must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) errs.push_back("dropout must lie in [0, 1)");
  if (hidden_size <= 0) errs.push_back("hidden_size must be positive");
  if (depth != 1) errs.push_back("depth must be 1");
  if (!(threshold > 0.0 && threshold < 1.0)) errs.push_back("threshold must lie in (0, 1)");
  return errs;
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename V>
V parse_number(const std::string& key, const std::string& value) {
  V out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ValidationError(key + ": cannot parse '" + value + "'");
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {"epochs", "batch_size", "lr", "beta1", "beta2", "eps",
                                                "lr_decay", "lr_decay_every", "clip_norm", "dropout",
                                                "hidden_size", "depth", "threshold", "precision"};
  return keys;
}

}  // namespace

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "epochs=" << epochs << '\n'
     << "batch_size=" << batch_size << '\n'
     << "lr=" << num(lr) << '\n'
     << "beta1=" << num(beta1) << '\n'
     << "beta2=" << num(beta2) << '\n'
     << "eps=" << num(eps) << '\n'
     << "lr_decay=" << num(lr_decay) << '\n'
     << "lr_decay_every=" << lr_decay_every << '\n'
     << "clip_norm=" << num(clip_norm) << '\n'
     << "dropout=" << num(dropout) << '\n'
     << "hidden_size=" << hidden_size << '\n'
     << "depth=" << depth << '\n'
     << "threshold=" << num(threshold) << '\n'
     << "precision=" << (precision == Precision::float32 ? "float32" : "float64") << '\n';
  return os.str();
}

bool TrainConfig::is_key(const std::string& key) {
  const auto& keys = config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "beta1") beta1 = parse_number<double>(key, value);
  else if (key == "beta2") beta2 = parse_number<double>(key, value);
  else if (key == "eps") eps = parse_number<double>(key, value);
  else if (key == "lr_decay") lr_decay = parse_number<double>(key, value);
  else if (key == "lr_decay_every") lr_decay_every = parse_number<int>(key, value);
  else if (key == "clip_norm") clip_norm = parse_number<double>(key, value);
  else if (key == "dropout") dropout = parse_number<double>(key, value);
  else if (key == "hidden_size") hidden_size = parse_number<int>(key, value);
  else if (key == "depth") depth = parse_number<int>(key, value);
  else if (key == "threshold") threshold = parse_number<double>(key, value);
  else if (key == "precision") {
    if (value == "float32") precision = Precision::float32;
    else if (value == "float64") precision = Precision::float64;
    else throw ValidationError("precision: expected float32 or float64, got '" + value + "'");
  } else {
    throw ValidationError("unknown training key '" + key + "'");
  }
}

std::vector<EncodedSentence> encode_sentences(const std::vector<LabeledSentence>& sents,
                                              const EmbeddingMatrix& matrix,
                                              const ContextualVectorFile* contextual) {
  std::vector<EncodedSentence> out;
  out.reserve(sents.size());
  for (const auto& s : sents) {
    const auto tokens = tokenize_lenient(s.text);
    if (tokens.empty()) throw ValidationError("sentence '" + s.id + "' has no tokens");
    EmbeddingSequence seq = embed(matrix, tokens);
    if (contextual) {
      const auto* ctx = contextual->find(s.id);
      if (!ctx) throw ValidationError("no contextual vectors for sentence '" + s.id + "'");
      seq = concat_contextual(seq, *ctx, s.id);
    }
    out.push_back({s.id, std::move(seq.vectors), s.is_causal() ? 1 : 0});
  }
  return out;
}

template <typename T>
eval::PredictionSet infer(const BiGruAttParams<T>& params, const std::vector<EncodedSentence>& sentences) {
  std::vector<eval::PredictionRecord> recs;
  recs.reserve(sentences.size());
  for (const auto& s : sentences) {
    if (s.inputs.rows() != params.input_dim()) {
      throw ValidationError("sentence '" + s.id + "' has input dimension " + std::to_string(s.inputs.rows()) +
                            " but the model expects " + std::to_string(params.input_dim()));
    }
    const Mat<T> x = s.inputs.template cast<T>();
    const auto rec = forward(params, x);
    recs.push_back({s.id, static_cast<double>(rec.probability), s.gold});
  }
  return eval::PredictionSet(std::move(recs));
}

namespace {

template <typename T>
TrainResult train_impl(const std::vector<EncodedSentence>& train_set, const std::vector<EncodedSentence>& validation,
                       const TrainConfig& config, std::uint64_t seed,
                       const std::function<void(const EpochRecord&)>& on_epoch) {
  const Eigen::Index input_dim = train_set.front().inputs.rows();
  std::vector<Mat<T>> inputs;
  std::vector<int> golds;
  inputs.reserve(train_set.size());
  for (const auto& s : train_set) {
    if (s.inputs.rows() != input_dim) throw ValidationError("training sentences differ in input dimension");
    if (s.inputs.cols() < 1) throw ValidationError("sentence '" + s.id + "' is empty");
    inputs.push_back(s.inputs.template cast<T>());
    golds.push_back(s.gold);
  }

  BiGruAttParams<T> params = init_params<T>(input_dim, config.hidden_size, mix_seed(seed, 0));
  AdamState<T> adam(params);
  const AdamSettings adam_settings{config.beta1, config.beta2, config.eps};
  Rng order_rng(mix_seed(seed, 1));
  Rng dropout_rng(mix_seed(seed, 2));
  const T dropout = static_cast<T>(config.dropout);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate(epoch);
    order_rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<const Mat<T>*> xs;
      std::vector<int> ys;
      for (std::size_t k = start; k < end; ++k) {
        xs.push_back(&inputs[order[k]]);
        ys.push_back(golds[order[k]]);
      }
      BatchGradient<T> bg;
      try {
        bg = batch_gradient(params, xs, ys, dropout, config.dropout > 0.0 ? &dropout_rng : nullptr);
      } catch (const RuntimeError& e) {
        throw RuntimeError("training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_index + 1) + ": " + e.what());
      }
      if (!std::isfinite(static_cast<double>(bg.loss))) {
        throw RuntimeError("training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_index + 1) + ": non-finite loss");
      }
      loss_sum += static_cast<double>(bg.loss) * static_cast<double>(end - start);
      clip_gradients(bg.grads, config.clip_norm);
      adam_step(params, bg.grads, adam, lr, adam_settings);
    }

    const auto val = infer(params, validation);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_f1 = eval::prf1(val, config.threshold).f1;
    rec.val_auc = val.positives() > 0 ? eval::auc_pr(val) : 0.0;
    if (rec.val_f1 > result.best_val_f1) {
      rec.best = true;
      result.best_val_f1 = rec.val_f1;
      result.best_epoch = rec.epoch;
      result.params = params.template cast<float>();
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace

TrainResult train(const std::vector<EncodedSentence>& train_set, const std::vector<EncodedSentence>& validation,
                  const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  if (const auto errs = config.validation_errors(); !errs.empty()) {
    std::string msg = "invalid training configuration:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  if (train_set.empty()) throw ValidationError("empty training set");
  if (validation.empty()) throw ValidationError("empty validation set");
  if (config.precision == Precision::float64) return train_impl<double>(train_set, validation, config, seed, on_epoch);
  return train_impl<float>(train_set, validation, config, seed, on_epoch);
}

std::string history_tsv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch\tlr\ttrain_loss\tval_f1\tval_auc\tbest\n";
  for (const auto& r : history) {
    os << r.epoch << '\t' << num(r.lr) << '\t' << num(r.train_loss) << '\t' << num(r.val_f1) << '\t'
       << num(r.val_auc) << '\t' << (r.best ? 1 : 0) << '\n';
  }
  return os.str();
}

template eval::PredictionSet infer(const BiGruAttParams<float>&, const std::vector<EncodedSentence>&);
template eval::PredictionSet infer(const BiGruAttParams<double>&, const std::vector<EncodedSentence>&);

}  // namespace causal::nn
