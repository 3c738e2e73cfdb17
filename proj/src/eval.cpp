#include "causal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "causal/error.hpp"
#include "causal/random.hpp"

namespace causal::eval {

using ordered_json = nlohmann::ordered_json;

PredictionSet::PredictionSet(std::vector<PredictionRecord> records) : records_(std::move(records)) {
  std::unordered_set<std::string> ids;
  for (const auto& r : records_) {
    if (!std::isfinite(r.probability) || r.probability < 0.0 || r.probability > 1.0) {
      throw ValidationError("prediction '" + r.id + "' has probability outside [0, 1]");
    }
    if (r.gold != 0 && r.gold != 1) throw ValidationError("prediction '" + r.id + "' has gold outside {0, 1}");
    if (!ids.insert(r.id).second) throw ValidationError("duplicate prediction id '" + r.id + "'");
  }
}

std::size_t PredictionSet::positives() const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.gold == 1; }));
}

namespace {

Prf prf_raw(std::span<const PredictionRecord> recs, double threshold) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& r : recs) {
    const bool predicted = r.probability >= threshold;
    if (predicted && r.gold == 1) ++tp;
    if (predicted && r.gold == 0) ++fp;
    if (!predicted && r.gold == 1) ++fn;
  }
  Prf out;
  out.precision = tp + fp > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = tp + fn > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

bool ranks_before(const PredictionRecord& a, const PredictionRecord& b) {
  if (a.probability != b.probability) return a.probability > b.probability;
  return a.id < b.id;
}

double ap_raw(std::span<const PredictionRecord> recs) {
  std::vector<const PredictionRecord*> order;
  order.reserve(recs.size());
  for (const auto& r : recs) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return ranks_before(*a, *b); });
  std::size_t tp = 0;
  std::size_t positives = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (order[k]->gold == 1) {
      ++tp;
      ++positives;
      sum += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  if (positives == 0) throw ValidationError("auc_pr needs at least one positive record");
  return sum / static_cast<double>(positives) * 100.0;
}

double metric_raw(std::span<const PredictionRecord> recs, Metric metric, double threshold) {
  switch (metric) {
    case Metric::f1: return prf_raw(recs, threshold).f1;
    case Metric::precision: return prf_raw(recs, threshold).precision;
    case Metric::recall: return prf_raw(recs, threshold).recall;
    case Metric::auc_pr: return ap_raw(recs);
  }
  return 0.0;
}

}  // namespace

Prf prf1(const PredictionSet& preds, double threshold) { return prf_raw(preds.records(), threshold); }

double auc_pr(const PredictionSet& preds) { return ap_raw(preds.records()); }

MetricsReport evaluate(const PredictionSet& preds, double threshold) {
  MetricsReport r;
  const Prf prf = prf1(preds, threshold);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.f1 = prf.f1;
  r.threshold = threshold;
  r.n_pos = preds.positives();
  r.n_neg = preds.size() - r.n_pos;
  r.auc_pr = r.n_pos > 0 ? auc_pr(preds) : 0.0;
  return r;
}

Metric parse_metric(std::string_view name) {
  if (name == "f1") return Metric::f1;
  if (name == "precision" || name == "p") return Metric::precision;
  if (name == "recall" || name == "r") return Metric::recall;
  if (name == "auc" || name == "auc_pr") return Metric::auc_pr;
  throw ValidationError("unknown metric '" + std::string(name) + "' (f1|precision|recall|auc)");
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::f1: return "f1";
    case Metric::precision: return "precision";
    case Metric::recall: return "recall";
    case Metric::auc_pr: return "auc_pr";
  }
  return "unknown";
}

double metric_value(const PredictionSet& preds, Metric metric, double threshold) {
  return metric_raw(preds.records(), metric, threshold);
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    out.mean = values.front();
    return out;
  }
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

RepetitionSummary aggregate(const std::vector<MetricsReport>& runs) {
  if (runs.size() < 2) throw ValidationError("aggregate needs at least two runs");
  auto column = [&](double MetricsReport::*field) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(r.*field);
    // Summation order fixed by value so the result is permutation-invariant.
    std::sort(v.begin(), v.end());
    return mean_std(v);
  };
  RepetitionSummary s;
  s.precision = column(&MetricsReport::precision);
  s.recall = column(&MetricsReport::recall);
  s.f1 = column(&MetricsReport::f1);
  s.auc_pr = column(&MetricsReport::auc_pr);
  s.runs = runs;
  return s;
}

SignificanceResult approx_randomization(const PredictionSet& a, const PredictionSet& b, Metric metric,
                                        const RandomizationOptions& opt) {
  if (a.size() != b.size()) throw ValidationError("significance test: prediction sets differ in size");
  if (opt.iterations == 0) throw ValidationError("significance test: iterations must be positive");
  if (!(opt.swap_fraction >= 0.0 && opt.swap_fraction <= 1.0)) {
    throw ValidationError("significance test: swap fraction must lie in [0, 1]");
  }
  auto sorted = [](const PredictionSet& s) {
    auto v = s.records();
    std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
    return v;
  };
  const auto ra = sorted(a);
  const auto rb = sorted(b);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].id != rb[i].id || ra[i].gold != rb[i].gold) {
      throw ValidationError("significance test: prediction sets are not aligned at id '" + ra[i].id + "'");
    }
  }

  SignificanceResult result;
  result.metric = metric;
  result.iterations = opt.iterations;
  result.swap_fraction = opt.swap_fraction;
  result.observed_delta = std::abs(metric_raw(ra, metric, opt.threshold) - metric_raw(rb, metric, opt.threshold));

  auto run_range = [&](std::size_t begin, std::size_t end) {
    std::size_t hits = 0;
    std::vector<PredictionRecord> sa = ra;
    std::vector<PredictionRecord> sb = rb;
    for (std::size_t it = begin; it < end; ++it) {
      Rng rng(mix_seed(opt.seed, it));
      for (std::size_t i = 0; i < ra.size(); ++i) {
        const bool swap = rng.bernoulli(opt.swap_fraction);
        sa[i].probability = swap ? rb[i].probability : ra[i].probability;
        sb[i].probability = swap ? ra[i].probability : rb[i].probability;
      }
      const double delta = std::abs(metric_raw(sa, metric, opt.threshold) - metric_raw(sb, metric, opt.threshold));
      if (delta >= result.observed_delta) ++hits;
    }
    return hits;
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(opt.iterations)));
  std::size_t hits = 0;
  if (workers == 1) {
    hits = run_range(0, opt.iterations);
  } else {
    std::vector<std::size_t> partial(workers, 0);
    std::vector<std::thread> pool;
    const std::size_t chunk = (opt.iterations + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(opt.iterations, w * chunk);
      const std::size_t end = std::min(opt.iterations, begin + chunk);
      pool.emplace_back([&, w, begin, end] { partial[w] = run_range(begin, end); });
    }
    for (auto& t : pool) t.join();
    hits = std::accumulate(partial.begin(), partial.end(), std::size_t{0});
  }
  result.p_value = static_cast<double>(hits + 1) / static_cast<double>(opt.iterations + 1);
  return result;
}

std::size_t select_best_run(const std::vector<RunSummary>& runs) {
  if (runs.empty()) throw ValidationError("select_best_run: no runs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const auto& b = runs[best];
    if (r.validation_f1 > b.validation_f1 || (r.validation_f1 == b.validation_f1 && r.seed < b.seed)) best = i;
  }
  return best;
}

void write_predictions(const PredictionSet& preds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  for (const auto& r : preds.records()) {
    ordered_json j;
    j["id"] = r.id;
    j["probability"] = r.probability;
    j["gold"] = r.gold;
    out << j.dump() << '\n';
  }
  if (!out) throw RuntimeError("write failed for " + path.string());
}

PredictionSet read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<PredictionRecord> recs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      recs.push_back({j.at("id").get<std::string>(), j.at("probability").get<double>(), j.at("gold").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return PredictionSet(std::move(recs));
}

namespace {

ordered_json metrics_object(const MetricsReport& r) {
  ordered_json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["auc_pr"] = r.auc_pr;
  j["threshold"] = r.threshold;
  j["n_pos"] = r.n_pos;
  j["n_neg"] = r.n_neg;
  return j;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace

std::string metrics_json(const MetricsReport& report) { return metrics_object(report).dump(2) + "\n"; }

MetricsReport parse_metrics_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.auc_pr = j.at("auc_pr").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.n_pos = j.at("n_pos").get<std::size_t>();
    r.n_neg = j.at("n_neg").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad metrics record: ") + e.what());
  }
}

std::string summary_table(const std::string& label, const RepetitionSummary& s) {
  auto cell = [](const MeanStd& m) { return fixed(m.mean) + " +-" + fixed(m.std); };
  std::ostringstream os;
  os << "| Model | F1 | P | R | AUC |\n";
  os << "|---|---|---|---|---|\n";
  os << "| " << label << " | " << cell(s.f1) << " | " << cell(s.precision) << " | " << cell(s.recall) << " | "
     << cell(s.auc_pr) << " |\n";
  return os.str();
}

std::string summary_json(const RepetitionSummary& s) {
  ordered_json j;
  auto ms = [](const MeanStd& m) {
    ordered_json o;
    o["mean"] = m.mean;
    o["std"] = m.std;
    return o;
  };
  j["precision"] = ms(s.precision);
  j["recall"] = ms(s.recall);
  j["f1"] = ms(s.f1);
  j["auc_pr"] = ms(s.auc_pr);
  j["repetitions"] = s.runs.size();
  j["runs"] = ordered_json::array();
  for (const auto& r : s.runs) j["runs"].push_back(metrics_object(r));
  return j.dump(2) + "\n";
}

}  // namespace causal::eval
