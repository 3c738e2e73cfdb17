#include "causal/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "causal/checkpoint.hpp"
#include "causal/error.hpp"

namespace causal::cli {

namespace fs = std::filesystem;

ModelKind parse_model_kind(std::string_view name) {
  if (name == "bigruatt") return ModelKind::bigruatt;
  if (name == "bigruatt_ctx") return ModelKind::bigruatt_ctx;
  if (name == "lr_ngrams") return ModelKind::lr_ngrams;
  throw ValidationError("unknown model '" + std::string(name) + "' (bigruatt|bigruatt_ctx|lr_ngrams)");
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::bigruatt: return "bigruatt";
    case ModelKind::bigruatt_ctx: return "bigruatt_ctx";
    case ModelKind::lr_ngrams: return "lr_ngrams";
  }
  return "unknown";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename V>
V parse_num(const std::string& key, const std::string& value) {
  V out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ValidationError(key + ": cannot parse '" + value + "'");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot write " + tmp.string());
    out << text;
    if (!out) throw RuntimeError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

bool is_neural(ModelKind kind) { return kind != ModelKind::lr_ngrams; }

}  // namespace

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  os << "dataset=" << dataset << '\n'
     << "data=" << data.string() << '\n'
     << "model=" << cli::to_string(model) << '\n'
     << "embeddings=" << embeddings.string() << '\n'
     << "embeddings_format=" << (embeddings_format == EmbeddingFormat::binary ? "binary" : "text") << '\n'
     << "contextual=" << contextual.string() << '\n'
     << "repetitions=" << repetitions << '\n'
     << "seed_base=" << seed_base << '\n'
     << "output=" << output.string() << '\n'
     << "workers=" << workers << '\n';
  if (lr.l2) os << "l2=" << num(*lr.l2) << '\n';
  os << "max_iters=" << lr.max_iters << '\n' << "tol=" << num(lr.tol) << '\n';
  os << train.to_text();
  return os.str();
}

ExperimentConfig parse_experiment_config(const std::string& text, const fs::path& base_dir, bool check_paths) {
  std::map<std::string, std::string> kv;
  std::vector<std::string> errors;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kv.emplace(key, value).second) errors.push_back("duplicate key '" + key + "'");
  }

  ExperimentConfig cfg;
  auto attempt = [&](auto&& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      errors.emplace_back(e.what());
    }
  };

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  const auto dataset = take("dataset");
  if (!dataset || dataset->empty()) errors.emplace_back("missing required key 'dataset'");
  else cfg.dataset = *dataset;
  cfg.train = nn::TrainConfig::for_dataset(cfg.dataset);

  const auto model = take("model");
  if (!model) errors.emplace_back("missing required key 'model'");
  else attempt([&] { cfg.model = parse_model_kind(*model); });

  if (const auto v = take("data")) cfg.data = resolve(base_dir, *v);
  else errors.emplace_back("missing required key 'data'");

  if (const auto v = take("embeddings"); v && !v->empty()) cfg.embeddings = resolve(base_dir, *v);
  if (const auto v = take("embeddings_format")) attempt([&] { cfg.embeddings_format = parse_embedding_format(*v); });
  if (const auto v = take("contextual"); v && !v->empty()) cfg.contextual = resolve(base_dir, *v);
  if (const auto v = take("repetitions")) attempt([&] { cfg.repetitions = parse_num<int>("repetitions", *v); });
  if (const auto v = take("seed_base")) attempt([&] { cfg.seed_base = parse_num<std::uint64_t>("seed_base", *v); });
  if (const auto v = take("output")) cfg.output = resolve(base_dir, *v);
  else cfg.output = resolve(base_dir, "output");
  if (const auto v = take("workers")) attempt([&] { cfg.workers = parse_num<unsigned>("workers", *v); });
  if (const auto v = take("l2")) attempt([&] { cfg.lr.l2 = parse_num<double>("l2", *v); });
  if (const auto v = take("max_iters")) attempt([&] { cfg.lr.max_iters = parse_num<int>("max_iters", *v); });
  if (const auto v = take("tol")) attempt([&] { cfg.lr.tol = parse_num<double>("tol", *v); });

  for (const auto& [key, value] : kv) {
    if (nn::TrainConfig::is_key(key)) attempt([&, &key = key, &value = value] { cfg.train.set(key, value); });
    else errors.push_back("unknown key '" + key + "'");
  }

  if (cfg.repetitions < 1) errors.emplace_back("repetitions must be at least 1");
  if (cfg.workers < 1) errors.emplace_back("workers must be at least 1");
  if (cfg.lr.l2 && !(*cfg.lr.l2 >= 0.0)) errors.emplace_back("l2 must be non-negative");
  if (cfg.lr.max_iters < 1) errors.emplace_back("max_iters must be positive");
  if (!(cfg.lr.tol > 0.0)) errors.emplace_back("tol must be positive");
  for (const auto& e : cfg.train.validation_errors()) errors.push_back(e);
  if (model && is_neural(cfg.model) && cfg.embeddings.empty()) {
    errors.emplace_back("missing required key 'embeddings' for model " + *model);
  }
  if (model && cfg.model == ModelKind::bigruatt_ctx && cfg.contextual.empty()) {
    errors.emplace_back("model bigruatt_ctx needs 'contextual'");
  }
  if (check_paths) {
    if (!cfg.data.empty() && !fs::exists(cfg.data / "manifest.json")) {
      errors.push_back("data directory " + cfg.data.string() + " has no manifest.json");
    }
    if (!cfg.embeddings.empty() && !fs::exists(cfg.embeddings)) {
      errors.push_back("embeddings file " + cfg.embeddings.string() + " does not exist");
    }
    if (!cfg.contextual.empty() && !fs::exists(cfg.contextual)) {
      errors.push_back("contextual file " + cfg.contextual.string() + " does not exist");
    }
  }

  if (!errors.empty()) {
    std::string msg = "invalid experiment configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path, bool check_paths) {
  return parse_experiment_config(read_text(path), path.parent_path(), check_paths);
}

DatasetCard cmd_convert(const ConvertOptions& o, std::ostream& out) {
  if (o.inputs.empty()) throw ValidationError("convert: at least one input is required");
  std::vector<LabeledSentence> sents;
  for (const auto& input : o.inputs) {
    std::vector<LabeledSentence> part;
    if (o.source == "semeval") part = parse_semeval(input);
    else if (o.source == "causaltb") part = parse_causal_timebank(input, o.rule);
    else if (o.source == "eventsl") part = parse_event_storyline(input);
    else if (o.source == "biocausal") part = parse_biocausal(input);
    else throw ValidationError("unknown source kind '" + o.source + "' (semeval|causaltb|eventsl|biocausal)");
    sents.insert(sents.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  std::unordered_set<std::string> ids;
  for (const auto& s : sents) {
    if (!ids.insert(s.id).second) throw ValidationError("convert: duplicate sentence id '" + s.id + "'");
  }
  const auto parsed = make_card(o.source, sents);
  out << parsed.n_causal + parsed.n_noncausal << " total, " << parsed.n_causal << " causal\n";
  if (o.subsample) {
    sents = subsample_negatives(sents, *o.subsample, o.seed);
  }
  const auto card = make_card(o.source, sents, o.subsample);
  if (o.subsample) {
    out << "subsampled (seed " << o.seed << "): " << card.n_causal + card.n_noncausal << " total, "
        << card.n_causal << " causal\n";
  }
  write_canonical(sents, o.output);
  write_card(card, o.output.string() + ".card.json");
  return card;
}

CorpusSplit cmd_split(const SplitOptions& o, std::ostream& out) {
  const auto sents = read_canonical(o.input);
  auto split = stratified_split(sents, o.ratios, o.seed);
  write_split(split, o.output);
  auto line = [&](const char* name, const std::vector<LabeledSentence>& part) {
    const auto card = make_card(name, part);
    out << name << ": " << part.size() << " (" << card.n_causal << " causal, " << card.n_noncausal
        << " non-causal)\n";
  };
  line("train", split.train);
  line("validation", split.validation);
  line("test", split.test);
  return split;
}

namespace {

std::unordered_set<std::string> corpus_vocabulary(const CorpusSplit& split) {
  std::unordered_set<std::string> vocab;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& s : *part) {
      for (auto& t : tokenize_lenient(s.text)) vocab.insert(std::move(t));
    }
  }
  return vocab;
}

fs::path run_dir(const fs::path& output, std::uint64_t seed) { return output / "runs" / std::to_string(seed); }

}  // namespace

void cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
  const CorpusSplit split = read_split(cfg.data);
  fs::create_directories(cfg.output);
  write_text(cfg.output / "experiment.cfg", cfg.to_text());

  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < cfg.repetitions; ++k) seeds.push_back(cfg.seed_base + static_cast<std::uint64_t>(k));
  std::vector<std::string> messages(seeds.size());

  std::function<void(std::size_t)> run_one;
  std::optional<EmbeddingMatrix> matrix;
  std::vector<nn::EncodedSentence> train_enc, val_enc;

  if (cfg.model == ModelKind::lr_ngrams) {
    run_one = [&](std::size_t k) {
      const fs::path dir = run_dir(cfg.output, seeds[k]);
      fs::create_directories(dir);
      lr::FitReport report;
      const auto bundle = lr::fit_bundle(split.train, cfg.lr, &report);
      lr::save_bundle(bundle, dir / "checkpoint.bin");
      std::ostringstream hist;
      hist << "iterations\tobjective\tgrad_norm\tconverged\n"
           << report.iterations << '\t' << num(report.objective) << '\t' << num(report.grad_norm) << '\t'
           << (report.converged ? 1 : 0) << '\n';
      write_text(dir / "history.tsv", hist.str());
      const auto val = eval::evaluate(lr::infer(bundle, split.validation), cfg.train.threshold);
      write_text(dir / "val_metrics.json", eval::metrics_json(val));
      messages[k] = "seed " + std::to_string(seeds[k]) + ": validation F1 " + num(val.f1);
    };
  } else {
    const auto vocab = corpus_vocabulary(split);
    matrix = load_word2vec(cfg.embeddings, cfg.embeddings_format, LoadOptions{&vocab});
    std::optional<ContextualVectorFile> ctx;
    if (cfg.model == ModelKind::bigruatt_ctx) ctx = ContextualVectorFile::read(cfg.contextual);
    const ContextualVectorFile* ctx_ptr = ctx ? &*ctx : nullptr;
    train_enc = nn::encode_sentences(split.train, *matrix, ctx_ptr);
    val_enc = nn::encode_sentences(split.validation, *matrix, ctx_ptr);
    const std::string provenance = cfg.to_text();
    run_one = [&, provenance](std::size_t k) {
      const fs::path dir = run_dir(cfg.output, seeds[k]);
      fs::create_directories(dir);
      const auto result = nn::train(train_enc, val_enc, cfg.train, seeds[k]);
      nn::Checkpoint ck;
      ck.params = result.params;
      ck.contextual = cfg.model == ModelKind::bigruatt_ctx;
      ck.config = cfg.train;
      ck.seed = seeds[k];
      ck.best_epoch = result.best_epoch;
      ck.best_val_f1 = result.best_val_f1;
      ck.provenance = provenance;
      nn::save_checkpoint(ck, dir / "checkpoint.bin");
      write_text(dir / "history.tsv", nn::history_tsv(result.history));
      const auto val = eval::evaluate(nn::infer(result.params, val_enc), cfg.train.threshold);
      write_text(dir / "val_metrics.json", eval::metrics_json(val));
      messages[k] = "seed " + std::to_string(seeds[k]) + ": best epoch " + std::to_string(result.best_epoch) +
                    ", validation F1 " + num(val.f1);
    };
  }

  const unsigned workers = std::min<unsigned>(cfg.workers, static_cast<unsigned>(seeds.size()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < seeds.size(); ++k) run_one(k);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::exception_ptr> failures(seeds.size());
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          std::size_t k;
          {
            std::lock_guard lock(mu);
            if (next >= seeds.size()) return;
            k = next++;
          }
          try {
            run_one(k);
          } catch (...) {
            failures[k] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }
  for (const auto& m : messages) out << m << '\n';
}

std::vector<std::uint64_t> list_runs(const fs::path& dir) {
  const fs::path runs = dir / "runs";
  if (!fs::is_directory(runs)) throw ValidationError(dir.string() + " has no runs directory");
  std::vector<std::uint64_t> seeds;
  for (const auto& e : fs::directory_iterator(runs)) {
    if (!e.is_directory()) continue;
    const std::string name = e.path().filename().string();
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), seed);
    if (ec == std::errc() && ptr == name.data() + name.size()) seeds.push_back(seed);
  }
  std::sort(seeds.begin(), seeds.end());
  if (seeds.empty()) throw ValidationError(runs.string() + " contains no runs");
  return seeds;
}

eval::RepetitionSummary cmd_eval(const EvalOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment_config(o.runs_dir / "experiment.cfg", false);
  const fs::path test_path = o.test.value_or(cfg.data / "test.jsonl");
  const auto test = read_canonical(test_path);
  const auto seeds = list_runs(o.runs_dir);

  std::optional<EmbeddingMatrix> matrix;
  std::vector<nn::EncodedSentence> test_enc;
  if (is_neural(cfg.model)) {
    std::unordered_set<std::string> vocab;
    for (const auto& s : test) {
      for (auto& t : tokenize_lenient(s.text)) vocab.insert(std::move(t));
    }
    matrix = load_word2vec(o.embeddings.value_or(cfg.embeddings), o.embeddings_format.value_or(cfg.embeddings_format),
                           LoadOptions{&vocab});
    std::optional<ContextualVectorFile> ctx;
    if (cfg.model == ModelKind::bigruatt_ctx) ctx = ContextualVectorFile::read(o.contextual.value_or(cfg.contextual));
    test_enc = nn::encode_sentences(test, *matrix, ctx ? &*ctx : nullptr);
  }

  std::vector<eval::MetricsReport> reports;
  for (const auto seed : seeds) {
    const fs::path dir = run_dir(o.runs_dir, seed);
    const fs::path ck_path = dir / "checkpoint.bin";
    if (!fs::exists(ck_path)) throw ValidationError("missing checkpoint " + ck_path.string());
    eval::PredictionSet preds;
    if (is_neural(cfg.model)) {
      const auto ck = nn::load_checkpoint(ck_path);
      preds = nn::infer(ck.params, test_enc);
    } else {
      preds = lr::infer(lr::load_bundle(ck_path), test);
    }
    eval::write_predictions(preds, dir / "predictions.jsonl");
    const auto report = eval::evaluate(preds, cfg.train.threshold);
    write_text(dir / "test_metrics.json", eval::metrics_json(report));
    reports.push_back(report);
  }

  eval::RepetitionSummary summary;
  if (reports.size() >= 2) {
    summary = eval::aggregate(reports);
  } else {
    auto single = [](double v) { return eval::MeanStd{v, 0.0}; };
    summary.precision = single(reports[0].precision);
    summary.recall = single(reports[0].recall);
    summary.f1 = single(reports[0].f1);
    summary.auc_pr = single(reports[0].auc_pr);
    summary.runs = reports;
  }
  const std::string table = eval::summary_table(std::string(to_string(cfg.model)) + " (" + cfg.dataset + ")", summary);
  write_text(o.runs_dir / "summary.json", eval::summary_json(summary));
  write_text(o.runs_dir / "summary.md", table);
  out << table;
  return summary;
}

std::string format_significance(double p) {
  std::ostringstream os;
  os << "p = " << std::fixed << std::setprecision(4) << p;
  if (p <= 0.05) os << " *";
  return os.str();
}

eval::SignificanceResult cmd_sigtest(const SigtestOptions& o, std::ostream& out) {
  struct Side {
    std::uint64_t seed;
    double val_f1;
    eval::PredictionSet preds;
  };
  auto pick = [&](const fs::path& dir, const char* name) {
    const auto seeds = list_runs(dir);
    std::vector<eval::RunSummary> runs;
    for (const auto seed : seeds) {
      const auto m = eval::parse_metrics_json(read_text(run_dir(dir, seed) / "val_metrics.json"));
      runs.push_back({seed, m.f1});
    }
    const auto& best = runs[eval::select_best_run(runs)];
    const fs::path pred_path = run_dir(dir, best.seed) / "predictions.jsonl";
    if (!fs::exists(pred_path)) throw ValidationError("missing test predictions " + pred_path.string() + " (run eval first)");
    out << name << ": run " << best.seed << " of " << runs.size() << " (validation F1 " << std::fixed
        << std::setprecision(2) << best.validation_f1 << ")\n";
    return Side{best.seed, best.validation_f1, eval::read_predictions(pred_path)};
  };
  const Side a = pick(o.a, "A");
  const Side b = pick(o.b, "B");
  eval::RandomizationOptions ro;
  ro.iterations = o.iterations;
  ro.seed = o.seed;
  ro.workers = o.workers;
  auto result = eval::approx_randomization(a.preds, b.preds, o.metric, ro);
  result.selection_note = "best validation F1 per side (A seed " + std::to_string(a.seed) + ", B seed " +
                          std::to_string(b.seed) + ")";
  out << std::fixed << std::setprecision(2) << eval::to_string(o.metric) << ": A "
      << eval::metric_value(a.preds, o.metric) << ", B " << eval::metric_value(b.preds, o.metric) << ", delta "
      << result.observed_delta << " over " << a.preds.size() << " sentences, " << result.iterations
      << " iterations\n";
  out << format_significance(result.p_value) << '\n';
  return result;
}

}  // namespace causal::cli
