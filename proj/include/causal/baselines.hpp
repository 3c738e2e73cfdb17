#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "causal/corpus.hpp"
#include "causal/eval.hpp"
#include "causal/text.hpp"

namespace causal::lr {

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  double l2 = 0.0;

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

struct FitOptions {
  // Strength of (l2 / 2) * ||w||^2 added to the mean cross-entropy. Unset
  // means 1 / n_examples, which matches an inverse-regularization C = 1 on
  // the summed loss.
  std::optional<double> l2;
  int max_iters = 1000;
  double tol = 1e-6;
};

struct FitReport {
  int iterations = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
};

// Mean cross-entropy + (l2 / 2) ||w||^2 with an unregularized bias.
double objective(const LinearModel& model, const std::vector<SparseVector>& xs, const std::vector<int>& ys);

// Gradient of objective(); the last entry is d/d(bias).
std::vector<double> gradient(const LinearModel& model, const std::vector<SparseVector>& xs,
                             const std::vector<int>& ys);

// Deterministic L-BFGS with Armijo backtracking from the zero model. Stops
// when the gradient norm drops below tol or after max_iters.
LinearModel fit_lr(const std::vector<SparseVector>& xs, const std::vector<int>& ys, std::size_t dim,
                   const FitOptions& options = {}, FitReport* report = nullptr);

// sigma(w . v + b). Throws ValidationError when v has an index outside w.
double predict_lr(const LinearModel& model, const SparseVector& v);

struct Bundle {
  TfidfModel tfidf;
  LinearModel model;
};

Bundle fit_bundle(const std::vector<LabeledSentence>& train, const FitOptions& options = {},
                  FitReport* report = nullptr);
eval::PredictionSet infer(const Bundle& bundle, const std::vector<LabeledSentence>& sentences);

// Magic "CSDLRB01", u32 version, the tf-idf block, then u64 dim, dim f64
// weights, f64 bias, f64 l2.
void save_bundle(const Bundle& bundle, const std::filesystem::path& path);
Bundle load_bundle(const std::filesystem::path& path);

}  // namespace causal::lr
