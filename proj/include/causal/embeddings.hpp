#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "causal/text.hpp"

namespace causal {

enum class EmbeddingFormat { text, binary };

EmbeddingFormat parse_embedding_format(std::string_view name);

// Frozen word vectors. Rows are never modified after construction.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // Rows are given as a row-major V x dim buffer. Duplicate words keep the
  // first row; the number of dropped duplicates is available afterwards.
  EmbeddingMatrix(std::size_t dim, std::vector<std::string> words, std::vector<float> rows);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  std::size_t duplicates_dropped() const { return duplicates_; }

  // nullptr for out-of-vocabulary words.
  const float* find(const std::string& word) const;
  const float* row(std::size_t i) const { return rows_.data() + i * dim_; }

  // FNV-1a over the vocabulary and row bytes.
  std::uint64_t checksum() const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<float> rows_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::size_t duplicates_ = 0;
};

struct LoadOptions {
  // When set, rows for other words are skipped (they are still validated).
  const std::unordered_set<std::string>* keep = nullptr;
};

// word2vec files: header "V d", then V entries. Text entries are
// "word v1 ... vd" lines; binary entries are the word, one space, and d
// little-endian float32 values.
EmbeddingMatrix load_word2vec(const std::filesystem::path& path, EmbeddingFormat format,
                              const LoadOptions& options = {});
void write_word2vec(const EmbeddingMatrix& matrix, const std::filesystem::path& path,
                    EmbeddingFormat format);

// Per-token vectors, one column per token.
struct EmbeddingSequence {
  Eigen::MatrixXf vectors;  // dim x n

  Eigen::Index dim() const { return vectors.rows(); }
  Eigen::Index length() const { return vectors.cols(); }
};

// Known tokens map to their row, unknown tokens to the zero vector.
EmbeddingSequence embed(const EmbeddingMatrix& matrix, const TokenSequence& tokens);

// Appends contextual vectors below the static ones, position by position.
EmbeddingSequence concat_contextual(const EmbeddingSequence& seq, const Eigen::MatrixXf& contextual,
                                    const std::string& sentence_id);

// Precomputed contextual vectors keyed by sentence id. Binary layout:
// magic "CSDCTXV1", u32 version, u32 dim, then per record u32 id length,
// id bytes, u32 token count, count*dim little-endian float32 (token-major).
class ContextualVectorFile {
 public:
  static constexpr std::uint32_t kVersion = 1;

  explicit ContextualVectorFile(std::uint32_t dim = 1024) : dim_(dim) {}

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  void add(const std::string& id, Eigen::MatrixXf vectors);  // dim x n
  const Eigen::MatrixXf* find(const std::string& id) const;
  const std::map<std::string, Eigen::MatrixXf>& records() const { return records_; }

  void write(const std::filesystem::path& path) const;
  static ContextualVectorFile read(const std::filesystem::path& path);

 private:
  std::uint32_t dim_;
  std::map<std::string, Eigen::MatrixXf> records_;
};

}  // namespace causal
