#include "causal/baselines.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "causal/binary_io.hpp"
#include "causal/error.hpp"

namespace causal::lr {

namespace fs = std::filesystem;

namespace {

double dot(const std::vector<double>& w, const SparseVector& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.indices.size(); ++k) s += w[x.indices[k]] * x.values[k];
  return s;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_inputs(const std::vector<SparseVector>& xs, const std::vector<int>& ys, std::size_t dim) {
  if (xs.empty() || xs.size() != ys.size()) throw ValidationError("logistic regression needs matching, non-empty data");
  for (const auto& x : xs) {
    if (!x.indices.empty() && x.indices.back() >= dim) throw ValidationError("feature index outside the model");
  }
}

// Flat parameter vector: weights followed by the bias.
struct Problem {
  const std::vector<SparseVector>& xs;
  const std::vector<int>& ys;
  std::size_t dim;
  double l2;

  double value_and_grad(const std::vector<double>& theta, std::vector<double>* grad) const {
    const double n = static_cast<double>(xs.size());
    const double bias = theta[dim];
    double loss = 0.0;
    if (grad) grad->assign(dim + 1, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double z = bias;
      for (std::size_t k = 0; k < xs[i].indices.size(); ++k) z += theta[xs[i].indices[k]] * xs[i].values[k];
      loss += ys[i] == 1 ? softplus(-z) : softplus(z);
      if (grad) {
        const double r = (logistic(z) - static_cast<double>(ys[i])) / n;
        for (std::size_t k = 0; k < xs[i].indices.size(); ++k) (*grad)[xs[i].indices[k]] += r * xs[i].values[k];
        (*grad)[dim] += r;
      }
    }
    double wsq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) wsq += theta[j] * theta[j];
    if (grad) {
      for (std::size_t j = 0; j < dim; ++j) (*grad)[j] += l2 * theta[j];
    }
    return loss / n + 0.5 * l2 * wsq;
  }
};

double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<double> flatten(const LinearModel& m) {
  std::vector<double> theta = m.weights;
  theta.push_back(m.bias);
  return theta;
}

}  // namespace

double objective(const LinearModel& model, const std::vector<SparseVector>& xs, const std::vector<int>& ys) {
  check_inputs(xs, ys, model.weights.size());
  return Problem{xs, ys, model.weights.size(), model.l2}.value_and_grad(flatten(model), nullptr);
}

std::vector<double> gradient(const LinearModel& model, const std::vector<SparseVector>& xs,
                             const std::vector<int>& ys) {
  check_inputs(xs, ys, model.weights.size());
  std::vector<double> g;
  Problem{xs, ys, model.weights.size(), model.l2}.value_and_grad(flatten(model), &g);
  return g;
}

LinearModel fit_lr(const std::vector<SparseVector>& xs, const std::vector<int>& ys, std::size_t dim,
                   const FitOptions& options, FitReport* report) {
  check_inputs(xs, ys, dim);
  const auto positives = std::count(ys.begin(), ys.end(), 1);
  if (positives == 0 || positives == static_cast<long>(ys.size())) {
    throw ValidationError("logistic regression needs both classes in the training data");
  }
  const double l2 = options.l2.value_or(1.0 / static_cast<double>(xs.size()));
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ValidationError("l2 strength must be finite and non-negative");
  const Problem problem{xs, ys, dim, l2};

  constexpr std::size_t kHistory = 10;
  constexpr double kArmijo = 1e-4;
  std::vector<double> theta(dim + 1, 0.0);
  std::vector<double> grad;
  double f = problem.value_and_grad(theta, &grad);
  std::deque<std::pair<std::vector<double>, std::vector<double>>> memory;  // (s, y)

  FitReport rep;
  std::vector<double> dir(dim + 1), next(dim + 1), next_grad;
  while (true) {
    rep.grad_norm = std::sqrt(dotv(grad, grad));
    if (rep.grad_norm < options.tol) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= options.max_iters) break;

    // Two-loop recursion for the quasi-Newton direction.
    dir = grad;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, y] = memory[k];
      alpha[k] = dotv(s, dir) / dotv(y, s);
      for (std::size_t j = 0; j < dir.size(); ++j) dir[j] -= alpha[k] * y[j];
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      const double gamma = dotv(s, y) / dotv(y, y);
      for (double& d : dir) d *= gamma;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double beta = dotv(y, dir) / dotv(y, s);
      for (std::size_t j = 0; j < dir.size(); ++j) dir[j] += (alpha[k] - beta) * s[j];
    }
    for (double& d : dir) d = -d;
    double slope = dotv(grad, dir);
    if (!(slope < 0.0)) {
      memory.clear();
      for (std::size_t j = 0; j < dir.size(); ++j) dir[j] = -grad[j];
      slope = -rep.grad_norm * rep.grad_norm;
    }

    double step = memory.empty() ? std::min(1.0, 1.0 / rep.grad_norm) : 1.0;
    double f_next = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t j = 0; j < theta.size(); ++j) next[j] = theta[j] + step * dir[j];
      f_next = problem.value_and_grad(next, &next_grad);
      if (f_next <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++rep.iterations;
    if (!accepted) break;

    std::vector<double> s(theta.size()), y(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
      s[j] = next[j] - theta[j];
      y[j] = next_grad[j] - grad[j];
    }
    if (dotv(s, y) > 1e-12 * std::sqrt(dotv(s, s) * dotv(y, y))) {
      memory.emplace_back(std::move(s), std::move(y));
      if (memory.size() > kHistory) memory.pop_front();
    }
    theta.swap(next);
    grad.swap(next_grad);
    f = f_next;
  }
  rep.objective = f;
  if (report) *report = rep;

  LinearModel model;
  model.bias = theta[dim];
  theta.pop_back();
  model.weights = std::move(theta);
  model.l2 = l2;
  return model;
}

double predict_lr(const LinearModel& model, const SparseVector& v) {
  if (!v.indices.empty() && v.indices.back() >= model.weights.size()) {
    throw ValidationError("feature vector has dimension beyond the model's " + std::to_string(model.weights.size()));
  }
  return logistic(dot(model.weights, v) + model.bias);
}

Bundle fit_bundle(const std::vector<LabeledSentence>& train, const FitOptions& options, FitReport* report) {
  std::vector<TokenSequence> docs;
  std::vector<int> ys;
  docs.reserve(train.size());
  for (const auto& s : train) {
    docs.push_back(tokenize_lenient(s.text));
    ys.push_back(s.is_causal() ? 1 : 0);
  }
  Bundle b;
  b.tfidf = TfidfModel::fit(docs);
  std::vector<SparseVector> xs;
  xs.reserve(docs.size());
  for (const auto& d : docs) xs.push_back(b.tfidf.transform(d));
  b.model = fit_lr(xs, ys, b.tfidf.size(), options, report);
  return b;
}

eval::PredictionSet infer(const Bundle& bundle, const std::vector<LabeledSentence>& sentences) {
  std::vector<eval::PredictionRecord> recs;
  recs.reserve(sentences.size());
  for (const auto& s : sentences) {
    const double p = predict_lr(bundle.model, bundle.tfidf.transform(tokenize_lenient(s.text)));
    recs.push_back({s.id, p, s.is_causal() ? 1 : 0});
  }
  return eval::PredictionSet(std::move(recs));
}

namespace {
constexpr char kBundleMagic[9] = "CSDLRB01";
constexpr std::uint32_t kBundleVersion = 1;
}  // namespace

void save_bundle(const Bundle& bundle, const fs::path& path) {
  if (bundle.model.weights.size() != bundle.tfidf.size()) {
    throw ValidationError("linear model and tf-idf vocabulary differ in size");
  }
  std::ostringstream out(std::ios::binary);
  binio::put_magic(out, kBundleMagic);
  binio::put_u32(out, kBundleVersion);
  bundle.tfidf.write(out);
  binio::put_u64(out, bundle.model.weights.size());
  for (double w : bundle.model.weights) binio::put_f64(out, w);
  binio::put_f64(out, bundle.model.bias);
  binio::put_f64(out, bundle.model.l2);

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw RuntimeError("cannot write " + tmp.string());
    const std::string bytes = out.str();
    file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!file) throw RuntimeError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Bundle load_bundle(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    binio::expect_magic(in, kBundleMagic, "logistic regression bundle");
    if (binio::get_u32(in, "version") != kBundleVersion) throw ParseError("unsupported bundle version");
    Bundle b;
    b.tfidf = TfidfModel::read(in);
    const std::uint64_t dim = binio::get_u64(in, "dimension");
    if (dim != b.tfidf.size()) throw ParseError("weight vector does not match the vocabulary");
    b.model.weights.resize(dim);
    for (auto& w : b.model.weights) w = binio::get_f64(in, "weight");
    b.model.bias = binio::get_f64(in, "bias");
    b.model.l2 = binio::get_f64(in, "l2");
    return b;
  } catch (const ValidationError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace causal::lr
