#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "causal/error.hpp"
#include "causal/eval.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace causal;
using namespace causal::eval;

namespace {

PredictionSet make(const std::vector<double>& probs, const std::vector<int>& gold) {
  std::vector<PredictionRecord> r;
  for (std::size_t i = 0; i < probs.size(); ++i) r.push_back({"p" + std::to_string(i), probs[i], gold[i]});
  return PredictionSet(std::move(r));
}

MetricsReport report(double v) {
  MetricsReport r;
  r.precision = r.recall = r.f1 = r.auc_pr = v;
  return r;
}

}  // namespace

TEST_CASE("prediction set validation") {
  CHECK_THROWS_AS(make({0.5, 0.2}, {1, 2}), ValidationError);
  CHECK_THROWS_AS(make({1.5}, {1}), ValidationError);
  CHECK_THROWS_AS(make({std::nan("")}, {1}), ValidationError);
  CHECK_THROWS_AS(PredictionSet({{"a", 0.1, 0}, {"a", 0.2, 1}}), ValidationError);
}

TEST_CASE("prf1") {
  const auto perfect = prf1(make({0.9, 0.1, 0.7}, {1, 0, 1}));
  CHECK(perfect.precision == 100.0);
  CHECK(perfect.recall == 100.0);
  CHECK(perfect.f1 == 100.0);

  const auto half = prf1(make({0.9, 0.8, 0.3}, {1, 0, 1}));
  CHECK(half.precision == doctest::Approx(50.0));
  CHECK(half.recall == doctest::Approx(50.0));
  CHECK(half.f1 == doctest::Approx(50.0));

  const auto none = prf1(make({0.1, 0.2}, {1, 0}));
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  CHECK(prf1(make({0.5}, {1})).f1 == 100.0);
}

TEST_CASE("auc_pr examples") {
  CHECK(auc_pr(make({0.9, 0.8, 0.1}, {1, 1, 0})) == doctest::Approx(100.0));
  CHECK(auc_pr(make({0.9, 0.8, 0.3}, {1, 0, 1})) == doctest::Approx(83.3333333333).epsilon(1e-9));
  CHECK_THROWS_AS(auc_pr(make({0.9, 0.1}, {0, 0})), ValidationError);
  // ties resolved by id: p0 ranks before p1
  CHECK(auc_pr(make({0.5, 0.5}, {0, 1})) == doctest::Approx(50.0));
  CHECK(auc_pr(make({0.5, 0.5}, {1, 0})) == doctest::Approx(100.0));
}

TEST_CASE("auc_pr equals the brute-force enumeration") {
  Rng rng(77);
  for (int t = 0; t < 300; ++t) {
    const auto p = causal::testing::random_predictions(rng, 1 + rng.below(50));
    CHECK(auc_pr(p) == causal::testing::brute_force_ap(p));
  }
}

TEST_CASE("metrics are permutation and rank invariant") {
  Rng rng(78);
  for (int t = 0; t < 50; ++t) {
    const auto p = causal::testing::random_predictions(rng, 2 + rng.below(40));
    auto recs = p.records();
    rng.shuffle(std::span(recs));
    const PredictionSet q(recs);
    CHECK(auc_pr(q) == auc_pr(p));
    CHECK(prf1(q).f1 == prf1(p).f1);
    for (auto& r : recs) r.probability = r.probability * r.probability * 0.5;
    CHECK(auc_pr(PredictionSet(recs)) == auc_pr(p));
  }
}

TEST_CASE("aggregate") {
  const auto same = aggregate({report(70), report(70), report(70)});
  CHECK(same.f1.std == 0.0);
  CHECK(same.f1.mean == 70.0);

  const auto two = aggregate({report(80), report(90)});
  CHECK(two.f1.mean == 85.0);
  CHECK(two.auc_pr.std == doctest::Approx(7.0710678).epsilon(1e-7));

  Rng rng(3);
  std::vector<MetricsReport> runs;
  for (int i = 0; i < 10; ++i) runs.push_back(report(rng.uniform(50, 100)));
  const auto a = aggregate(runs);
  for (int k = 0; k < 10; ++k) {
    rng.shuffle(std::span(runs));
    const auto b = aggregate(runs);
    CHECK(a.f1.mean == b.f1.mean);
    CHECK(a.f1.std == b.f1.std);
  }
  CHECK_THROWS_AS(aggregate({report(1)}), ValidationError);
}

TEST_CASE("approximate randomization") {
  Rng rng(90);
  const auto a = causal::testing::random_predictions(rng, 30);

  SUBCASE("identical systems") {
    const auto r = approx_randomization(a, a, Metric::auc_pr, {1000, 0.5, 1, 1});
    CHECK(r.p_value == 1.0);
    CHECK(r.observed_delta == 0.0);
  }
  SUBCASE("deterministic and independent of worker count") {
    const auto b = causal::testing::paired_system(rng, a, 0.4);
    const auto r1 = approx_randomization(a, b, Metric::f1, {2000, 0.5, 5, 1});
    const auto r2 = approx_randomization(a, b, Metric::f1, {2000, 0.5, 5, 1});
    const auto r3 = approx_randomization(a, b, Metric::f1, {2000, 0.5, 5, 4});
    CHECK(r1.p_value == r2.p_value);
    CHECK(r1.p_value == r3.p_value);
    CHECK(r1.p_value >= 1.0 / 2001.0);
    CHECK(r1.p_value <= 1.0);
  }
  SUBCASE("agrees with exhaustive enumeration for n = 10") {
    for (int t = 0; t < 4; ++t) {
      const auto x = causal::testing::random_predictions(rng, 10);
      const auto y = causal::testing::paired_system(rng, x, 0.5);
      for (Metric m : {Metric::auc_pr, Metric::f1}) {
        const double exact = causal::testing::exhaustive_art_p(x, y, m);
        const auto mc = approx_randomization(x, y, m, {10000, 0.5, static_cast<std::uint64_t>(t), 2});
        CHECK(std::abs(mc.p_value - exact) <= 0.02);
      }
    }
  }
  SUBCASE("misaligned sets") {
    auto recs = a.records();
    recs[0].id = "other";
    CHECK_THROWS_AS(approx_randomization(a, PredictionSet(recs), Metric::f1), ValidationError);
    recs = a.records();
    recs[0].gold = 1 - recs[0].gold;
    CHECK_THROWS_AS(approx_randomization(a, PredictionSet(recs), Metric::f1), ValidationError);
    recs.pop_back();
    CHECK_THROWS_AS(approx_randomization(a, PredictionSet(recs), Metric::f1), ValidationError);
  }
}

TEST_CASE("select_best_run") {
  CHECK(select_best_run({{3, 50.0}}) == 0);
  CHECK(select_best_run({{1, 70.0}, {2, 80.0}, {3, 75.0}}) == 1);
  std::vector<RunSummary> runs = {{5, 80.0}, {2, 80.0}, {9, 60.0}, {7, 80.0}};
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    rng.shuffle(std::span(runs));
    CHECK(runs[select_best_run(runs)].seed == 2);
  }
  CHECK_THROWS_AS(select_best_run({}), ValidationError);
}

TEST_CASE("prediction and metrics files") {
  Rng rng(5);
  const auto p = causal::testing::random_predictions(rng, 25);
  const fs::path dir = fs::temp_directory_path() / "causal_test_eval";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_predictions(p, dir / "p.jsonl");
  CHECK(read_predictions(dir / "p.jsonl") == p);

  const auto m = evaluate(p);
  const auto back = parse_metrics_json(metrics_json(m));
  CHECK(back.f1 == m.f1);
  CHECK(back.auc_pr == m.auc_pr);
  CHECK(back.n_pos == m.n_pos);
  CHECK(back.n_neg == m.n_neg);
  CHECK(metrics_json(m).find("\"auc_pr\"") != std::string::npos);

  const auto table = summary_table("BiGRUAtt", aggregate({report(80), report(90)}));
  CHECK(table.find("85.00 +-7.07") != std::string::npos);
}

TEST_CASE("metric names") {
  CHECK(parse_metric("auc") == Metric::auc_pr);
  CHECK(parse_metric("f1") == Metric::f1);
  CHECK(to_string(Metric::recall) == "recall");
  CHECK_THROWS_AS(parse_metric("roc"), ValidationError);
}
