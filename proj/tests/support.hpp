#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "causal/corpus.hpp"
#include "causal/embeddings.hpp"
#include "causal/eval.hpp"
#include "causal/neuralnet.hpp"
#include "causal/random.hpp"
#include "causal/train.hpp"

namespace causal::testing {

using nn::BiGruAttParams;
using nn::Mat;

inline Mat<double> random_inputs(Rng& rng, Eigen::Index dim, Eigen::Index n, double scale = 1.0) {
  Mat<double> x(dim, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) x(i, j) = rng.uniform(-scale, scale);
  }
  return x;
}

// Same distribution for every block, wider than the default init so that
// gates move away from the linear regime.
inline BiGruAttParams<double> random_params(Rng& rng, Eigen::Index d_in, Eigen::Index d_h, double scale = 0.8) {
  BiGruAttParams<double> p(d_in, d_h);
  nn::for_each_tensor(p, [&](const std::string&, auto& t) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = rng.uniform(-scale, scale);
    }
  });
  return p;
}

// Mean clamped cross-entropy recomputed from forward passes only.
inline double batch_loss(const BiGruAttParams<double>& p, const std::vector<Mat<double>>& xs,
                         const std::vector<int>& ys) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double prob = nn::forward(p, xs[i]).probability;
    const double q = std::clamp(prob, nn::kProbClamp, 1.0 - nn::kProbClamp);
    total += ys[i] == 1 ? -std::log(q) : -std::log(1.0 - q);
  }
  return total / static_cast<double>(xs.size());
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor) with n from central differences.
inline GradCheck check_gradients(const BiGruAttParams<double>& params, const std::vector<Mat<double>>& xs,
                                 const std::vector<int>& ys, double step = 1e-5, double floor = 1e-6) {
  std::vector<const Mat<double>*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  const auto analytic = nn::batch_gradient(params, ptrs, ys);

  GradCheck out;
  BiGruAttParams<double> probe = params;
  std::vector<const double*> grad_ptrs;
  nn::for_each_tensor(analytic.grads, [&](const std::string&, const auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) grad_ptrs.push_back(t.data() + k);
  });
  std::vector<std::pair<std::string, double*>> slots;
  nn::for_each_tensor(probe, [&](const std::string& name, auto& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k) slots.emplace_back(name + "[" + std::to_string(k) + "]", t.data() + k);
  });
  for (std::size_t k = 0; k < slots.size(); ++k) {
    double* w = slots[k].second;
    const double saved = *w;
    *w = saved + step;
    const double up = batch_loss(probe, xs, ys);
    *w = saved - step;
    const double down = batch_loss(probe, xs, ys);
    *w = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = *grad_ptrs[k];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = slots[k].first;
    }
    ++out.checked;
  }
  return out;
}

// One random tiny model and batch; contextual widens the inputs by 1024.
inline GradCheck random_gradient_case(std::uint64_t seed, bool contextual = false) {
  Rng rng(seed);
  const Eigen::Index d_e = 4;
  const Eigen::Index d_in = contextual ? d_e + 1024 : d_e;
  const Eigen::Index d_h = 3;
  const auto params = random_params(rng, d_in, d_h, contextual ? 0.15 : 0.8);
  std::vector<Mat<double>> xs;
  std::vector<int> ys;
  for (int b = 0; b < 2; ++b) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(6));
    xs.push_back(random_inputs(rng, d_in, n));
    ys.push_back(static_cast<int>(rng.below(2)));
  }
  return check_gradients(params, xs, ys);
}

// Separable toy corpus: causal sentences carry a marker direction in the
// first input coordinate at a random position, the rest is noise.
inline std::vector<nn::EncodedSentence> toy_corpus(std::size_t count, Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<nn::EncodedSentence> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto n = static_cast<Eigen::Index>(3 + rng.below(6));
    nn::EncodedSentence s;
    s.id = "toy-" + std::to_string(i);
    s.gold = i % 2 == 0 ? 1 : 0;
    s.inputs.resize(dim, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < dim; ++k) s.inputs(k, j) = static_cast<float>(rng.uniform(-0.5, 0.5));
      s.inputs(0, j) = -1.0f;
    }
    if (s.gold == 1) s.inputs(0, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)))) = 1.0f;
    out.push_back(std::move(s));
  }
  return out;
}

// Random prediction set with coarse probabilities so ties are common. Ids
// are shuffled so that id order differs from insertion order.
inline eval::PredictionSet random_predictions(Rng& rng, std::size_t n, bool force_positive = true) {
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i;
  rng.shuffle(std::span(labels));
  std::vector<eval::PredictionRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    eval::PredictionRecord r;
    r.id = "r" + std::to_string(labels[i]);
    r.probability = static_cast<double>(rng.below(11)) / 10.0;
    r.gold = rng.bernoulli(0.4) ? 1 : 0;
    recs.push_back(r);
  }
  if (force_positive) recs[rng.below(n)].gold = 1;
  return eval::PredictionSet(std::move(recs));
}

// Walks every cutoff of the ranking (probability descending, id
// ascending), recounting true positives at each one, and sums precision
// where the cutoff adds a positive.
inline double brute_force_ap(const eval::PredictionSet& preds) {
  std::vector<eval::PredictionRecord> v = preds.records();
  for (std::size_t i = 1; i < v.size(); ++i) {
    for (std::size_t j = i; j > 0; --j) {
      const auto& a = v[j - 1];
      const auto& b = v[j];
      const bool out_of_order = b.probability > a.probability || (b.probability == a.probability && b.id < a.id);
      if (!out_of_order) break;
      std::swap(v[j - 1], v[j]);
    }
  }
  std::size_t positives = 0;
  for (const auto& r : v) positives += r.gold == 1;
  double sum = 0.0;
  for (std::size_t k = 1; k <= v.size(); ++k) {
    if (v[k - 1].gold != 1) continue;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < k; ++i) tp += v[i].gold == 1;
    sum += static_cast<double>(tp) / static_cast<double>(k);
  }
  return sum / static_cast<double>(positives) * 100.0;
}

// Exact randomization p over all 2^n swap patterns (aligned by position).
inline double exhaustive_art_p(const eval::PredictionSet& a, const eval::PredictionSet& b, eval::Metric metric) {
  const auto& ra = a.records();
  const auto& rb = b.records();
  const std::size_t n = ra.size();
  const double observed = std::abs(eval::metric_value(a, metric) - eval::metric_value(b, metric));
  std::size_t hits = 0;
  const std::size_t patterns = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < patterns; ++mask) {
    auto sa = ra;
    auto sb = rb;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) std::swap(sa[i].probability, sb[i].probability);
    }
    const double d = std::abs(eval::metric_value(eval::PredictionSet(sa), metric) -
                              eval::metric_value(eval::PredictionSet(sb), metric));
    if (d >= observed) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(patterns);
}

// System b shares ids and gold labels with a, with its own probabilities.
inline eval::PredictionSet paired_system(Rng& rng, const eval::PredictionSet& a, double noise) {
  auto recs = a.records();
  for (auto& r : recs) {
    const double target = r.gold == 1 ? 0.7 : 0.3;
    r.probability = std::clamp(target + rng.uniform(-noise, noise), 0.0, 1.0);
  }
  return eval::PredictionSet(std::move(recs));
}

// Small lexical corpus in which causal sentences use a causal verb, plus
// word vectors for its vocabulary. Returns the canonical corpus path.
inline std::filesystem::path write_toy_corpus(const std::filesystem::path& dir, std::size_t count = 200,
                                              std::uint64_t seed = 17) {
  const std::vector<std::string> nouns = {"smoking", "rain", "stress", "heat", "virus", "drug", "storm", "diet"};
  const std::vector<std::string> effects = {"cancer", "floods", "fatigue", "drought", "fever", "rash", "damage"};
  const std::vector<std::string> causal = {"causes", "triggers", "induces", "produces"};
  const std::vector<std::string> neutral = {"accompanies", "precedes", "resembles", "follows"};
  Rng rng(seed);
  std::vector<LabeledSentence> sents;
  for (std::size_t i = 0; i < count; ++i) {
    const bool is_causal = i % 2 == 0;
    const auto& verbs = is_causal ? causal : neutral;
    LabeledSentence s;
    s.id = "toy-" + std::to_string(i);
    s.text = "The " + nouns[rng.below(nouns.size())] + " " + verbs[rng.below(verbs.size())] + " " +
             effects[rng.below(effects.size())] + ".";
    s.label = is_causal ? Label::causal : Label::non_causal;
    s.source = Source::biocausal;
    sents.push_back(s);
  }
  std::filesystem::create_directories(dir);
  write_canonical(sents, dir / "corpus.jsonl");

  std::vector<std::string> words = {"the"};
  for (const auto* list : {&nouns, &effects, &causal, &neutral}) words.insert(words.end(), list->begin(), list->end());
  std::vector<float> rows;
  for (std::size_t i = 0; i < words.size() * 8; ++i) rows.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
  write_word2vec(EmbeddingMatrix(8, words, rows), dir / "vectors.txt", EmbeddingFormat::text);
  return dir / "corpus.jsonl";
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace causal::testing
