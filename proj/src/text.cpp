#include "causal/text.hpp"

#include <clocale>
#include <cmath>
#include <cwctype>
#include <istream>
#include <locale.h>
#include <map>
#include <ostream>
#include <set>

#include "causal/binary_io.hpp"
#include "causal/error.hpp"

namespace causal {

namespace {

// Decodes one UTF-8 code point starting at s[i]; invalid sequences decode
// as U+FFFD and consume one byte.
char32_t decode(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Unicode classification through the C.UTF-8 ctype tables, independent of
// the process-global locale.
class UnicodeCtype {
 public:
  UnicodeCtype() {
    loc_ = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(0));
    if (loc_ == static_cast<locale_t>(0)) loc_ = newlocale(LC_CTYPE_MASK, "C.utf8", static_cast<locale_t>(0));
  }
  ~UnicodeCtype() {
    if (loc_ != static_cast<locale_t>(0)) freelocale(loc_);
  }
  UnicodeCtype(const UnicodeCtype&) = delete;
  UnicodeCtype& operator=(const UnicodeCtype&) = delete;

  bool is_word(char32_t cp) const {
    if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    if (loc_ == static_cast<locale_t>(0)) return false;
    return iswalnum_l(static_cast<wint_t>(cp), loc_) != 0;
  }

  char32_t lower(char32_t cp) const {
    if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
    if (loc_ == static_cast<locale_t>(0)) return cp;
    return static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc_));
  }

 private:
  locale_t loc_ = static_cast<locale_t>(0);
};

const UnicodeCtype& ctype() {
  static const UnicodeCtype instance;
  return instance;
}

}  // namespace

TokenSequence tokenize_lenient(std::string_view text) {
  const auto& ct = ctype();
  TokenSequence tokens;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = decode(text, i);
    if (ct.is_word(cp)) {
      encode(ct.lower(cp), cur);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

TokenSequence tokenize(std::string_view text) {
  auto tokens = tokenize_lenient(text);
  if (tokens.empty()) {
    throw ValidationError("sentence has no tokens: '" + std::string(text.substr(0, 80)) + "'");
  }
  return tokens;
}

double SparseVector::norm() const {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  return std::sqrt(sq);
}

std::vector<std::string> ngrams(const TokenSequence& tokens, int max_order) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string gram;
    for (int k = 0; k < max_order && i + static_cast<std::size_t>(k) < tokens.size(); ++k) {
      if (k > 0) gram += ' ';
      gram += tokens[i + static_cast<std::size_t>(k)];
      out.push_back(gram);
    }
  }
  return out;
}

TfidfModel TfidfModel::fit(const std::vector<TokenSequence>& corpus) {
  if (corpus.empty()) throw ValidationError("cannot fit tf-idf on an empty corpus");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    const auto grams = ngrams(doc);
    const std::set<std::string> unique(grams.begin(), grams.end());
    for (const auto& g : unique) ++df[g];
  }
  TfidfModel model;
  model.doc_count_ = corpus.size();
  const double n = static_cast<double>(corpus.size());
  model.terms_.reserve(df.size());
  model.idf_.reserve(df.size());
  for (const auto& [term, count] : df) {
    model.index_.emplace(term, static_cast<std::uint32_t>(model.terms_.size()));
    model.terms_.push_back(term);
    model.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return model;
}

long TfidfModel::index_of(const std::string& ngram) const {
  const auto it = index_.find(ngram);
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

SparseVector TfidfModel::transform(const TokenSequence& tokens) const {
  std::map<std::uint32_t, double> counts;
  for (const auto& g : ngrams(tokens)) {
    const auto it = index_.find(g);
    if (it != index_.end()) counts[it->second] += 1.0;
  }
  SparseVector v;
  v.indices.reserve(counts.size());
  v.values.reserve(counts.size());
  for (const auto& [idx, tf] : counts) {
    v.indices.push_back(idx);
    v.values.push_back(tf * idf_[idx]);
  }
  const double norm = v.norm();
  if (norm > 0.0) {
    for (double& x : v.values) x /= norm;
  }
  return v;
}

namespace {
constexpr char kTfidfMagic[9] = "CSDTFIDF";
constexpr std::uint32_t kTfidfVersion = 1;
}  // namespace

void TfidfModel::write(std::ostream& out) const {
  binio::put_magic(out, kTfidfMagic);
  binio::put_u32(out, kTfidfVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(kMaxOrder));
  binio::put_u64(out, doc_count_);
  binio::put_u64(out, terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    binio::put_string(out, terms_[i]);
    binio::put_f64(out, idf_[i]);
  }
}

TfidfModel TfidfModel::read(std::istream& in) {
  binio::expect_magic(in, kTfidfMagic, "tf-idf model");
  if (binio::get_u32(in, "version") != kTfidfVersion) throw ParseError("unsupported tf-idf model version");
  if (binio::get_u32(in, "n-gram order") != static_cast<std::uint32_t>(kMaxOrder)) {
    throw ParseError("tf-idf model has a different n-gram order");
  }
  TfidfModel model;
  model.doc_count_ = binio::get_u64(in, "document count");
  const std::uint64_t v = binio::get_u64(in, "vocabulary size");
  for (std::uint64_t i = 0; i < v; ++i) {
    std::string term = binio::get_string(in, 1u << 16, "n-gram");
    const double idf = binio::get_f64(in, "idf");
    if (!std::isfinite(idf) || idf <= 0.0) throw ParseError("invalid idf for '" + term + "'");
    if (!model.index_.emplace(term, static_cast<std::uint32_t>(i)).second) {
      throw ParseError("duplicate n-gram '" + term + "'");
    }
    model.terms_.push_back(std::move(term));
    model.idf_.push_back(idf);
  }
  return model;
}

}  // namespace causal
