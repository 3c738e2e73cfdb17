#include "causal/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "causal/error.hpp"
#include "causal/random.hpp"

namespace causal {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Label label) {
  return label == Label::causal ? "causal" : "non_causal";
}

std::string_view to_string(Source source) {
  switch (source) {
    case Source::semeval: return "semeval";
    case Source::causaltb: return "causaltb";
    case Source::eventsl: return "eventsl";
    case Source::biocausal: return "biocausal";
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "causal") return Label::causal;
  if (text == "non_causal") return Label::non_causal;
  throw ValidationError("unknown label '" + std::string(text) + "'");
}

Source parse_source(std::string_view text) {
  if (text == "semeval") return Source::semeval;
  if (text == "causaltb") return Source::causaltb;
  if (text == "eventsl") return Source::eventsl;
  if (text == "biocausal") return Source::biocausal;
  throw ValidationError("unknown source '" + std::string(text) + "'");
}

DatasetCard make_card(std::string name, const std::vector<LabeledSentence>& sents,
                      std::optional<std::size_t> subsample_target) {
  DatasetCard card;
  card.name = std::move(name);
  card.n_causal = static_cast<std::size_t>(
      std::count_if(sents.begin(), sents.end(), [](const auto& s) { return s.is_causal(); }));
  card.n_noncausal = sents.size() - card.n_causal;
  card.subsample_target = subsample_target;
  return card;
}

namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

// Removes <e1>..</e1> and <e2>..</e2>, requiring each tag exactly once and
// in open-before-close order.
std::string strip_entity_tags(const std::string& text, const std::string& where) {
  std::string out = text;
  for (const char* name : {"e1", "e2"}) {
    const std::string open = std::string("<") + name + ">";
    const std::string close = std::string("</") + name + ">";
    const auto o = out.find(open);
    const auto c = out.find(close);
    if (o == std::string::npos || c == std::string::npos || c < o ||
        out.find(open, o + 1) != std::string::npos ||
        out.find(close, c + 1) != std::string::npos) {
      throw ParseError(where + ": unbalanced <" + name + "> tags");
    }
    out.erase(c, close.size());
    out.erase(o, open.size());
  }
  if (out.find("<e") != std::string::npos || out.find("</e") != std::string::npos) {
    throw ParseError(where + ": unexpected entity tag");
  }
  return out;
}

}  // namespace

std::vector<LabeledSentence> parse_semeval(const fs::path& path) {
  auto in = open_input(path);
  static const std::regex sentence_re(R"(^(\d+)\s+\"(.*)\"$)");
  static const std::regex relation_re(R"(^[A-Za-z]+(-[A-Za-z]+)?(\(e[12],e[12]\))?$)");

  std::vector<LabeledSentence> out;
  std::string raw;
  std::size_t line_no = 0;
  enum class Expect { sentence, relation, tail } expect = Expect::sentence;
  std::string record_where;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    switch (expect) {
      case Expect::sentence: {
        if (line.empty()) break;
        std::smatch m;
        if (!std::regex_match(line, m, sentence_re)) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) +
                           ": expected a numbered quoted sentence");
        }
        record_where = path.string() + ": record " + m[1].str() + " (line " +
                       std::to_string(line_no) + ")";
        LabeledSentence s;
        s.id = "semeval-" + m[1].str();
        s.text = trim(strip_entity_tags(m[2].str(), record_where));
        s.source = Source::semeval;
        if (s.text.empty()) throw ParseError(record_where + ": empty sentence");
        out.push_back(std::move(s));
        expect = Expect::relation;
        break;
      }
      case Expect::relation: {
        if (line.empty() || !std::regex_match(line, relation_re)) {
          throw ParseError(record_where + ": missing relation line");
        }
        out.back().label = line.starts_with("Cause-Effect") ? Label::causal : Label::non_causal;
        expect = Expect::tail;
        break;
      }
      case Expect::tail: {
        if (line.empty()) {
          expect = Expect::sentence;
        } else if (!line.starts_with("Comment")) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + record_where +
                           " is followed by unexpected text");
        }
        break;
      }
    }
  }
  if (expect == Expect::relation) throw ParseError(record_where + ": missing relation line");
  return out;
}

namespace {

std::vector<std::string> split_delimited(const std::string& line, char delim, bool& open_quote,
                                         std::vector<std::string> carry) {
  // Continues a record that may span physical lines inside quotes.
  std::vector<std::string> fields = std::move(carry);
  if (fields.empty()) fields.emplace_back();
  std::string* cur = &fields.back();
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (open_quote) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur->push_back('"');
          ++i;
        } else {
          open_quote = false;
        }
      } else {
        cur->push_back(c);
      }
    } else if (c == '"') {
      open_quote = true;
    } else if (c == delim) {
      fields.emplace_back();
      cur = &fields.back();
    } else if (c != '\r') {
      cur->push_back(c);
    }
  }
  if (open_quote) cur->push_back('\n');
  return fields;
}

std::optional<Label> parse_binary_label(const std::string& raw) {
  const std::string v = lower(trim(raw));
  if (v == "1" || v == "true" || v == "yes" || v == "causal" || v == "1.0") return Label::causal;
  if (v == "0" || v == "false" || v == "no" || v == "non_causal" || v == "non-causal" ||
      v == "noncausal" || v == "0.0")
    return Label::non_causal;
  return std::nullopt;
}

}  // namespace

std::vector<LabeledSentence> parse_biocausal(const fs::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) return {};
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  const char delim = line.find('\t') != std::string::npos ? '\t' : ',';

  bool open_quote = false;
  auto header = split_delimited(line, delim, open_quote, {});
  if (open_quote) throw ParseError(path.string() + ": unterminated quote in header");
  for (auto& h : header) h = lower(trim(h));

  auto find_column = [&](std::initializer_list<const char*> names) -> std::optional<std::size_t> {
    for (const char* n : names) {
      auto it = std::find(header.begin(), header.end(), n);
      if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
    }
    return std::nullopt;
  };
  if (header.size() < 2) throw ParseError(path.string() + ": need a sentence and a label column");
  const std::size_t text_col = find_column({"sentence", "text", "sent"}).value_or(0);
  const std::size_t label_col =
      find_column({"label", "causal", "is_causal", "class", "y"}).value_or(header.size() - 1);
  const auto id_col = find_column({"id", "sentence_id", "pmid"});
  if (text_col == label_col) throw ParseError(path.string() + ": cannot identify columns");

  std::vector<LabeledSentence> out;
  std::size_t row = 0;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    fields = split_delimited(line, delim, open_quote, std::move(fields));
    if (open_quote) continue;
    ++row;
    std::vector<std::string> record = std::move(fields);
    fields.clear();
    if (record.size() == 1 && trim(record[0]).empty()) continue;
    const std::string where = path.string() + ": row " + std::to_string(row);
    if (record.size() <= std::max(text_col, label_col)) throw ParseError(where + ": missing label");
    const auto label = parse_binary_label(record[label_col]);
    if (!label) throw ParseError(where + ": missing or unrecognized label '" + record[label_col] + "'");
    LabeledSentence s;
    s.text = trim(record[text_col]);
    if (s.text.empty()) throw ParseError(where + ": empty sentence");
    s.id = (id_col && *id_col < record.size() && !trim(record[*id_col]).empty())
               ? trim(record[*id_col])
               : "biocausal-" + std::to_string(row);
    s.label = *label;
    s.source = Source::biocausal;
    out.push_back(std::move(s));
  }
  if (open_quote) throw ParseError(path.string() + ": unterminated quote at end of file");
  return out;
}

std::vector<LabeledSentence> subsample_negatives(const std::vector<LabeledSentence>& sents,
                                                 std::size_t target, std::uint64_t seed) {
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < sents.size(); ++i) {
    if (!sents[i].is_causal()) negatives.push_back(i);
  }
  if (target > negatives.size()) {
    throw ValidationError("subsample target " + std::to_string(target) + " exceeds the " +
                          std::to_string(negatives.size()) + " available non-causal sentences");
  }
  // Partial Fisher-Yates: the first `target` slots become the sample.
  Rng rng(seed);
  for (std::size_t i = 0; i < target; ++i) {
    const std::size_t j = i + rng.below(negatives.size() - i);
    std::swap(negatives[i], negatives[j]);
  }
  std::vector<char> keep(sents.size(), 0);
  for (std::size_t i = 0; i < target; ++i) keep[negatives[i]] = 1;

  std::vector<LabeledSentence> out;
  out.reserve(sents.size() - negatives.size() + target);
  for (std::size_t i = 0; i < sents.size(); ++i) {
    if (sents[i].is_causal() || keep[i]) out.push_back(sents[i]);
  }
  return out;
}

namespace {

void validate_ratios(const SplitRatios& r) {
  for (double x : r) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
}

}  // namespace

CorpusSplit stratified_split(const std::vector<LabeledSentence>& sents, SplitRatios ratios,
                             std::uint64_t seed) {
  validate_ratios(ratios);
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < sents.size(); ++i) by_class[sents[i].is_causal() ? 0 : 1].push_back(i);
  for (const auto& members : by_class) {
    if (members.size() < 3) {
      throw ValidationError("each class needs at least 3 sentences to populate all splits");
    }
  }

  Rng rng(seed);
  std::vector<int> assignment(sents.size(), -1);
  for (auto& members : by_class) {
    rng.shuffle(std::span(members));
    const double c = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::floor(c * ratios[0] + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(c * ratios[1] + 1e-9));
    for (std::size_t k = 0; k < members.size(); ++k) {
      assignment[members[k]] = k < n_train ? 0 : (k < n_train + n_val ? 1 : 2);
    }
  }

  CorpusSplit split;
  split.seed = seed;
  split.ratios = ratios;
  for (std::size_t i = 0; i < sents.size(); ++i) {
    auto& dest = assignment[i] == 0 ? split.train : (assignment[i] == 1 ? split.validation : split.test);
    dest.push_back(sents[i]);
  }
  return split;
}

namespace {

ordered_json to_json(const LabeledSentence& s) {
  ordered_json j;
  j["id"] = s.id;
  j["text"] = s.text;
  j["label"] = to_string(s.label);
  j["source"] = to_string(s.source);
  return j;
}

void write_atomically(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw RuntimeError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string dump_line(const ordered_json& j) {
  try {
    return j.dump() + "\n";
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("cannot serialize record: ") + e.what());
  }
}

}  // namespace

void write_canonical(const std::vector<LabeledSentence>& sents, const fs::path& path) {
  std::string bytes;
  for (const auto& s : sents) bytes += dump_line(to_json(s));
  write_atomically(path, bytes);
}

std::vector<LabeledSentence> read_canonical(const fs::path& path) {
  auto in = open_input(path);
  std::vector<LabeledSentence> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object() || j.size() != 4) throw ParseError(where + ": expected exactly id, text, label, source");
      LabeledSentence s;
      s.id = j.at("id").get<std::string>();
      s.text = j.at("text").get<std::string>();
      s.label = parse_label(j.at("label").get<std::string>());
      s.source = parse_source(j.at("source").get<std::string>());
      if (trim(s.text).empty()) throw ParseError(where + ": empty text");
      if (!seen.insert(s.id).second) throw ParseError(where + ": duplicate id '" + s.id + "'");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

void write_split(const CorpusSplit& split, const fs::path& dir) {
  validate_ratios(split.ratios);
  fs::create_directories(dir);
  write_canonical(split.train, dir / "train.jsonl");
  write_canonical(split.validation, dir / "validation.jsonl");
  write_canonical(split.test, dir / "test.jsonl");
  ordered_json m;
  m["format"] = "causal-split";
  m["version"] = 1;
  m["seed"] = split.seed;
  m["ratios"] = {split.ratios[0], split.ratios[1], split.ratios[2]};
  m["files"] = {"train.jsonl", "validation.jsonl", "test.jsonl"};
  m["counts"] = {split.train.size(), split.validation.size(), split.test.size()};
  write_atomically(dir / "manifest.json", m.dump(2) + "\n");
}

CorpusSplit read_split(const fs::path& dir) {
  auto in = open_input(dir / "manifest.json");
  CorpusSplit split;
  try {
    const auto m = nlohmann::json::parse(in);
    if (m.value("format", "") != "causal-split") throw ParseError("not a split manifest");
    if (m.at("version").get<int>() != 1) throw ParseError("unsupported manifest version");
    split.seed = m.at("seed").get<std::uint64_t>();
    const auto r = m.at("ratios").get<std::vector<double>>();
    if (r.size() != 3) throw ParseError("manifest needs three ratios");
    split.ratios = {r[0], r[1], r[2]};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
  try {
    validate_ratios(split.ratios);
  } catch (const ValidationError& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
  split.train = read_canonical(dir / "train.jsonl");
  split.validation = read_canonical(dir / "validation.jsonl");
  split.test = read_canonical(dir / "test.jsonl");
  std::unordered_set<std::string> ids;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& s : *part) {
      if (!ids.insert(s.id).second) throw ParseError(dir.string() + ": id '" + s.id + "' occurs in two splits");
    }
  }
  return split;
}

void write_card(const DatasetCard& card, const fs::path& path) {
  if (card.subsample_target && *card.subsample_target > card.n_noncausal) {
    throw ValidationError("subsample target exceeds non-causal count");
  }
  ordered_json j;
  j["name"] = card.name;
  j["n_causal"] = card.n_causal;
  j["n_noncausal"] = card.n_noncausal;
  j["subsample_target"] = card.subsample_target ? ordered_json(*card.subsample_target) : ordered_json(nullptr);
  write_atomically(path, j.dump(2) + "\n");
}

}  // namespace causal
