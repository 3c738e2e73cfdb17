#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "causal/baselines.hpp"
#include "causal/error.hpp"
#include "causal/random.hpp"

namespace fs = std::filesystem;
using namespace causal;
using namespace causal::lr;

namespace {

SparseVector dense(const std::vector<double>& v) {
  SparseVector s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) {
      s.indices.push_back(static_cast<std::uint32_t>(i));
      s.values.push_back(v[i]);
    }
  }
  return s;
}

struct Problem {
  std::vector<SparseVector> xs;
  std::vector<int> ys;
};

Problem random_problem(std::uint64_t seed, std::size_t n, std::size_t dim) {
  Rng rng(seed);
  std::vector<double> truth(dim);
  for (auto& t : truth) t = rng.uniform(-2, 2);
  Problem p;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(dim, 0.0);
    double z = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      if (rng.bernoulli(0.6)) x[k] = rng.uniform(-1, 1);
      z += truth[k] * x[k];
    }
    p.xs.push_back(dense(x));
    p.ys.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0);
  }
  p.ys[0] = 1;
  p.ys[1] = 0;
  return p;
}

}  // namespace

TEST_CASE("predict_lr") {
  LinearModel zero;
  zero.weights.assign(3, 0.0);
  CHECK(predict_lr(zero, dense({1, 2, 3})) == 0.5);

  LinearModel m;
  m.weights = {0.5, -1.25, 2.0};
  m.bias = -0.3;
  CHECK(predict_lr(m, SparseVector{}) == doctest::Approx(1.0 / (1.0 + std::exp(0.3))).epsilon(1e-15));
  const double z = 0.5 * 0.2 + -1.25 * -0.4 + 2.0 * 0.7 - 0.3;
  CHECK(std::abs(predict_lr(m, dense({0.2, -0.4, 0.7})) - 1.0 / (1.0 + std::exp(-z))) < 1e-12);
  CHECK_THROWS_AS(predict_lr(m, dense({0, 0, 0, 1})), ValidationError);
}

TEST_CASE("strong regularization predicts the prior") {
  auto p = random_problem(4, 60, 8);
  FitOptions opt;
  opt.l2 = 1e8;
  const auto m = fit_lr(p.xs, p.ys, 8, opt);
  double pos = 0;
  for (int y : p.ys) pos += y;
  const double prior = pos / static_cast<double>(p.ys.size());
  for (double w : m.weights) CHECK(std::abs(w) < 1e-6);
  CHECK(predict_lr(m, p.xs[3]) == doctest::Approx(prior).epsilon(1e-4));
}

TEST_CASE("separable two-point set") {
  const std::vector<SparseVector> xs = {dense({1, 0}), dense({0, 1})};
  const std::vector<int> ys = {1, 0};
  FitOptions opt;
  opt.l2 = 1e-4;
  const auto m = fit_lr(xs, ys, 2, opt);
  CHECK(predict_lr(m, xs[0]) > 0.5);
  CHECK(predict_lr(m, xs[1]) < 0.5);
}

TEST_CASE("gradient at the optimum vanishes and matches finite differences") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto p = random_problem(seed, 80, 10);
    FitOptions opt;
    opt.l2 = 0.05;
    opt.tol = 1e-8;
    FitReport rep;
    const auto m = fit_lr(p.xs, p.ys, 10, opt, &rep);
    CHECK(rep.converged);

    // independent recomputation of the objective for the oracle
    auto obj = [&](const std::vector<double>& w, double b) {
      double total = 0.0;
      for (std::size_t i = 0; i < p.xs.size(); ++i) {
        double z = b;
        for (std::size_t k = 0; k < p.xs[i].indices.size(); ++k) z += w[p.xs[i].indices[k]] * p.xs[i].values[k];
        const double q = 1.0 / (1.0 + std::exp(-z));
        total -= p.ys[i] ? std::log(q) : std::log(1.0 - q);
      }
      double sq = 0.0;
      for (double x : w) sq += x * x;
      return total / static_cast<double>(p.xs.size()) + 0.5 * 0.05 * sq;
    };
    CHECK(objective(m, p.xs, p.ys) == doctest::Approx(obj(m.weights, m.bias)).epsilon(1e-12));

    const auto g = gradient(m, p.xs, p.ys);
    REQUIRE(g.size() == 11);
    const double h = 1e-6;
    double norm = 0.0;
    for (std::size_t k = 0; k <= 10; ++k) {
      auto w = m.weights;
      double b = m.bias;
      auto at = [&](double delta) {
        auto ww = w;
        double bb = b;
        if (k < 10) ww[k] += delta;
        else bb += delta;
        return obj(ww, bb);
      };
      const double numeric = (at(h) - at(-h)) / (2 * h);
      CHECK(std::abs(numeric - g[k]) < 1e-7);
      norm += numeric * numeric;
    }
    CHECK(std::sqrt(norm) < 1e-6);

    LinearModel zero;
    zero.weights.assign(10, 0.0);
    zero.l2 = 0.05;
    CHECK(objective(m, p.xs, p.ys) <= objective(zero, p.xs, p.ys));
  }
}

TEST_CASE("fit is deterministic and validates inputs") {
  const auto p = random_problem(9, 40, 6);
  CHECK(fit_lr(p.xs, p.ys, 6) == fit_lr(p.xs, p.ys, 6));
  CHECK(fit_lr(p.xs, p.ys, 6).l2 == doctest::Approx(1.0 / 40.0));
  const std::vector<int> ones(p.ys.size(), 1);
  CHECK_THROWS_AS(fit_lr(p.xs, ones, 6), ValidationError);
  CHECK_THROWS_AS(fit_lr({}, {}, 6), ValidationError);
  CHECK_THROWS_AS(fit_lr(p.xs, p.ys, 3), ValidationError);
}

TEST_CASE("bundle fit, infer and round trip") {
  const std::vector<LabeledSentence> train = {
      {"t1", "smoking causes cancer", Label::causal, Source::semeval},
      {"t2", "rain leads to floods", Label::causal, Source::semeval},
      {"t3", "the cat sat on the mat", Label::non_causal, Source::semeval},
      {"t4", "the sky is blue today", Label::non_causal, Source::semeval},
      {"t5", "heat causes drought", Label::causal, Source::semeval},
      {"t6", "the dog is brown", Label::non_causal, Source::semeval},
  };
  FitOptions opt;
  opt.l2 = 1e-3;
  const auto b = fit_bundle(train, opt);
  const auto preds = infer(b, train);
  REQUIRE(preds.size() == 6);
  for (const auto& r : preds.records()) CHECK((r.probability >= 0.5) == (r.gold == 1));

  const fs::path dir = fs::temp_directory_path() / "causal_test_lr";
  fs::remove_all(dir);
  save_bundle(b, dir / "b.bin");
  const auto back = load_bundle(dir / "b.bin");
  CHECK(back.tfidf == b.tfidf);
  CHECK(back.model == b.model);
  CHECK(infer(back, train) == preds);
  CHECK_THROWS_AS(load_bundle(dir / "none.bin"), ValidationError);
}
