// CAT-XML readers for Causal-TimeBank and EventStoryLine.
//
// A CAT document has three layers: <token> elements carrying t_id and a
// sentence index, markables that group tokens through <token_anchor t_id>
// children, and relations whose <source>/<target> children name markables
// by m_id.

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "causal/corpus.hpp"
#include "causal/error.hpp"

namespace causal {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

struct Markable {
  std::string tag;
  std::set<long> sentences;
};

struct Relation {
  std::string tag;
  std::map<std::string, std::string> attrs;
  std::vector<std::string> sources;
  std::vector<std::string> targets;
};

struct CatDocument {
  std::string name;
  std::map<long, std::vector<std::pair<long, std::string>>> sentences;  // index -> (number, token)
  std::unordered_map<std::string, Markable> markables;
  std::vector<Relation> relations;
};

std::string attr(const pt::ptree& node, std::initializer_list<const char*> names) {
  const auto attrs = node.get_child_optional("<xmlattr>");
  if (!attrs) return {};
  for (const char* n : names) {
    if (auto v = attrs->get_optional<std::string>(n)) return *v;
  }
  return {};
}

std::map<std::string, std::string> all_attrs(const pt::ptree& node) {
  std::map<std::string, std::string> out;
  if (const auto attrs = node.get_child_optional("<xmlattr>")) {
    for (const auto& [k, v] : *attrs) out[k] = v.data();
  }
  return out;
}

std::string trim_ws(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

long to_long(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(where + ": expected an integer, got '" + s + "'");
  }
}

bool is_relation(const pt::ptree& node) {
  return node.find("source") != node.not_found() || node.find("target") != node.not_found();
}

bool has_anchor(const pt::ptree& node) { return node.find("token_anchor") != node.not_found(); }

struct PendingMarkable {
  std::string id;
  std::string tag;
  std::vector<std::string> token_ids;
};

void collect(const pt::ptree& node, const std::string& tag, const std::string& doc,
             std::unordered_map<std::string, std::pair<long, long>>& tokens, CatDocument& out,
             std::vector<PendingMarkable>& markables) {
  if (tag == "token") {
    const std::string tid = attr(node, {"t_id", "id"});
    const std::string sent = attr(node, {"sentence"});
    if (tid.empty() || sent.empty()) throw ParseError(doc + ": token without t_id or sentence");
    const long s = to_long(sent, doc + " token " + tid);
    const std::string num = attr(node, {"number"});
    const long n = num.empty() ? static_cast<long>(out.sentences[s].size()) : to_long(num, doc + " token " + tid);
    if (!tokens.emplace(tid, std::pair{s, n}).second) throw ParseError(doc + ": duplicate token id " + tid);
    out.sentences[s].emplace_back(n, trim_ws(node.data()));
    return;
  }
  if (tag == "<xmlattr>" || tag == "<xmlcomment>") return;
  if (!tag.empty() && is_relation(node)) {
    Relation r;
    r.tag = tag;
    r.attrs = all_attrs(node);
    for (const auto& [child_tag, child] : node) {
      const std::string mid = attr(child, {"m_id", "id"});
      if (child_tag == "source") r.sources.push_back(mid);
      if (child_tag == "target") r.targets.push_back(mid);
    }
    const std::string rid = attr(node, {"r_id", "id"});
    for (const auto* ends : {&r.sources, &r.targets}) {
      for (const auto& m : *ends) {
        if (m.empty()) throw ParseError(doc + ": relation " + rid + " has an endpoint without m_id");
      }
    }
    out.relations.push_back(std::move(r));
    return;
  }
  const std::string mid = attr(node, {"m_id"});
  if (!tag.empty() && !mid.empty()) {
    PendingMarkable m{mid, tag, {}};
    for (const auto& [child_tag, child] : node) {
      if (child_tag == "token_anchor") m.token_ids.push_back(attr(child, {"t_id", "id"}));
    }
    markables.push_back(std::move(m));
    if (has_anchor(node)) return;
  }
  for (const auto& [child_tag, child] : node) collect(child, child_tag, doc, tokens, out, markables);
}

CatDocument read_cat_document(const fs::path& path) {
  pt::ptree tree;
  try {
    pt::read_xml(path.string(), tree, pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(path.string() + ": unreadable XML: " + e.what());
  }
  CatDocument doc;
  doc.name = path.stem().string();
  if (!tree.empty()) {
    const std::string declared = attr(tree.front().second, {"doc_name"});
    if (!declared.empty()) doc.name = declared;
  }
  const std::string where = path.string();

  std::unordered_map<std::string, std::pair<long, long>> tokens;
  std::vector<PendingMarkable> pending;
  collect(tree, "", where, tokens, doc, pending);

  for (auto& m : pending) {
    Markable mk;
    mk.tag = m.tag;
    for (const auto& tid : m.token_ids) {
      const auto it = tokens.find(tid);
      if (tid.empty() || it == tokens.end()) {
        throw ParseError(where + ": markable " + m.id + " references unknown token '" + tid + "'");
      }
      mk.sentences.insert(it->second.first);
    }
    if (!doc.markables.emplace(m.id, std::move(mk)).second) {
      throw ParseError(where + ": duplicate markable id " + m.id);
    }
  }
  for (const auto& r : doc.relations) {
    for (const auto* ends : {&r.sources, &r.targets}) {
      for (const auto& m : *ends) {
        if (!doc.markables.contains(m)) {
          throw ParseError(where + ": " + r.tag + " references unknown markable '" + m + "'");
        }
      }
    }
  }
  for (auto& [idx, toks] : doc.sentences) {
    std::stable_sort(toks.begin(), toks.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  return doc;
}

// Sentences that hold every endpoint of the relation. Empty when the
// endpoints lie in different sentences (such links are discarded).
std::set<long> intra_sentence(const CatDocument& doc, const Relation& r) {
  std::set<long> common;
  bool first = true;
  for (const auto* ends : {&r.sources, &r.targets}) {
    for (const auto& m : *ends) {
      const auto& s = doc.markables.at(m).sentences;
      if (first) {
        common = s;
        first = false;
      } else {
        std::set<long> keep;
        std::set_intersection(common.begin(), common.end(), s.begin(), s.end(),
                              std::inserter(keep, keep.begin()));
        common = std::move(keep);
      }
    }
  }
  if (r.sources.empty() || r.targets.empty()) return {};
  return common;
}

std::vector<fs::path> xml_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".xml") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

template <typename IsCausal>
void emit_sentences(const CatDocument& doc, Source source, const IsCausal& is_causal,
                    std::vector<LabeledSentence>& out) {
  for (const auto& [idx, toks] : doc.sentences) {
    std::string text;
    for (const auto& [n, tok] : toks) {
      if (tok.empty()) continue;
      if (!text.empty()) text += ' ';
      text += tok;
    }
    if (text.empty()) continue;
    LabeledSentence s;
    s.id = doc.name + "#" + std::to_string(idx);
    s.text = std::move(text);
    s.label = is_causal(idx) ? Label::causal : Label::non_causal;
    s.source = source;
    out.push_back(std::move(s));
  }
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

}  // namespace

std::vector<LabeledSentence> parse_causal_timebank(const fs::path& dir, TimebankRule rule) {
  std::vector<LabeledSentence> out;
  for (const auto& file : xml_files(dir)) {
    const CatDocument doc = read_cat_document(file);
    std::set<long> with_signal;
    std::set<long> with_clink;
    for (const auto& [id, m] : doc.markables) {
      if (upper(m.tag) == "C-SIGNAL") with_signal.insert(m.sentences.begin(), m.sentences.end());
    }
    for (const auto& r : doc.relations) {
      if (upper(r.tag) != "CLINK") continue;
      const auto s = intra_sentence(doc, r);
      with_clink.insert(s.begin(), s.end());
    }
    emit_sentences(doc, Source::causaltb, [&](long idx) {
      const bool sig = with_signal.contains(idx);
      const bool clink = with_clink.contains(idx);
      switch (rule) {
        case TimebankRule::signal_or_clink: return sig || clink;
        case TimebankRule::signal_and_clink: return sig && clink;
        case TimebankRule::clink_only: return clink;
        case TimebankRule::signal_only: return sig;
      }
      return false;
    }, out);
  }
  return out;
}

std::vector<LabeledSentence> parse_event_storyline(const fs::path& dir) {
  std::vector<LabeledSentence> out;
  for (const auto& file : xml_files(dir)) {
    const CatDocument doc = read_cat_document(file);
    std::set<long> causal_sents;
    for (const auto& r : doc.relations) {
      if (upper(r.tag) != "PLOT_LINK") continue;
      bool causal = false;
      for (const auto& [k, v] : r.attrs) {
        const std::string key = upper(k);
        const std::string val = upper(v);
        if ((key == "CAUSES" || key == "CAUSED_BY") && val == "TRUE") causal = true;
        if ((key == "RELTYPE" || key == "RELATION") && (val == "CAUSES" || val == "CAUSED_BY")) causal = true;
      }
      if (!causal) continue;
      const auto s = intra_sentence(doc, r);
      causal_sents.insert(s.begin(), s.end());
    }
    emit_sentences(doc, Source::eventsl, [&](long idx) { return causal_sents.contains(idx); }, out);
  }
  return out;
}

}  // namespace causal
