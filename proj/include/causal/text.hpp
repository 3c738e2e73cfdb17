#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace causal {

using TokenSequence = std::vector<std::string>;

// Lowercased maximal runs of Unicode letters or digits; every other code
// point separates tokens. Throws ValidationError when no token remains.
TokenSequence tokenize(std::string_view text);

// Same rule, but returns an empty sequence instead of throwing.
TokenSequence tokenize_lenient(std::string_view text);

struct SparseVector {
  std::vector<std::uint32_t> indices;  // strictly increasing
  std::vector<double> values;

  bool empty() const { return indices.empty(); }
  double norm() const;
};

class TfidfModel {
 public:
  static constexpr int kMaxOrder = 3;

  // Vocabulary is every 1..3-gram of the corpus. idf(t) = ln((1+N)/(1+df(t))) + 1.
  static TfidfModel fit(const std::vector<TokenSequence>& corpus);

  // Raw-count tf times idf over known n-grams, L2-normalized. Unseen
  // n-grams are ignored; a sentence with none yields the zero vector.
  SparseVector transform(const TokenSequence& tokens) const;

  std::size_t size() const { return idf_.size(); }
  std::size_t doc_count() const { return doc_count_; }
  const std::vector<double>& idf() const { return idf_; }
  const std::vector<std::string>& terms() const { return terms_; }
  // -1 when the n-gram (tokens joined by single spaces) is unknown.
  long index_of(const std::string& ngram) const;

  void write(std::ostream& out) const;
  static TfidfModel read(std::istream& in);

  friend bool operator==(const TfidfModel& a, const TfidfModel& b) {
    return a.doc_count_ == b.doc_count_ && a.terms_ == b.terms_ && a.idf_ == b.idf_;
  }

 private:
  std::size_t doc_count_ = 0;
  std::vector<std::string> terms_;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// All n-grams of orders 1..max_order, in positional order, tokens joined by
// single spaces.
std::vector<std::string> ngrams(const TokenSequence& tokens, int max_order = TfidfModel::kMaxOrder);

}  // namespace causal
