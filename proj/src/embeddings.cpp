#include "causal/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "causal/binary_io.hpp"
#include "causal/error.hpp"

namespace causal {

namespace fs = std::filesystem;

EmbeddingFormat parse_embedding_format(std::string_view name) {
  if (name == "text" || name == "txt") return EmbeddingFormat::text;
  if (name == "binary" || name == "bin") return EmbeddingFormat::binary;
  throw ValidationError("unknown embedding format '" + std::string(name) + "' (text|binary)");
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<std::string> words, std::vector<float> rows)
    : dim_(dim) {
  if (rows.size() != words.size() * dim) throw ValidationError("embedding rows do not match vocabulary size");
  words_.reserve(words.size());
  rows_.reserve(rows.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!index_.emplace(words[i], static_cast<std::uint32_t>(words_.size())).second) {
      ++duplicates_;
      continue;
    }
    words_.push_back(std::move(words[i]));
    rows_.insert(rows_.end(), rows.begin() + static_cast<std::ptrdiff_t>(i * dim),
                 rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  }
}

const float* EmbeddingMatrix::find(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? nullptr : row(it->second);
}

std::uint64_t EmbeddingMatrix::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(&dim_, sizeof dim_);
  for (const auto& w : words_) mix(w.data(), w.size() + 1);
  mix(rows_.data(), rows_.size() * sizeof(float));
  return h;
}

namespace {

std::pair<std::size_t, std::size_t> parse_header(const std::string& line, const fs::path& path) {
  std::istringstream iss(line);
  long long v = -1, d = -1;
  std::string extra;
  if (!(iss >> v >> d) || (iss >> extra) || v < 0 || d <= 0) {
    throw ParseError(path.string() + ": bad word2vec header '" + line + "'");
  }
  return {static_cast<std::size_t>(v), static_cast<std::size_t>(d)};
}

void check_finite(float f, const std::string& word, const fs::path& path) {
  if (!std::isfinite(f)) throw ParseError(path.string() + ": non-finite value in vector for '" + word + "'");
}

}  // namespace

EmbeddingMatrix load_word2vec(const fs::path& path, EmbeddingFormat format, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path.string() + ": empty embedding file");
  const auto [vocab, dim] = parse_header(header, path);

  std::vector<std::string> words;
  std::vector<float> rows;
  std::vector<float> vec(dim);
  std::size_t entries = 0;

  auto accept = [&](std::string word) {
    ++entries;
    if (entries > vocab) {
      throw ParseError(path.string() + ": header declares " + std::to_string(vocab) +
                       " words but the file has more");
    }
    if (options.keep && !options.keep->contains(word)) return;
    words.push_back(std::move(word));
    rows.insert(rows.end(), vec.begin(), vec.end());
  };

  if (format == EmbeddingFormat::text) {
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      const char* p = line.data();
      const char* end = p + line.size();
      while (p < end && *p == ' ') ++p;
      const char* w = p;
      while (p < end && *p != ' ' && *p != '\t') ++p;
      std::string word(w, p);
      for (std::size_t k = 0; k < dim; ++k) {
        while (p < end && (*p == ' ' || *p == '\t')) ++p;
        const auto [next, ec] = std::from_chars(p, end, vec[k]);
        if (ec != std::errc()) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(dim) + " values for '" + word + "'");
        }
        check_finite(vec[k], word, path);
        p = next;
      }
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p != end) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": too many values");
      accept(std::move(word));
    }
  } else {
    while (true) {
      int c = in.get();
      while (c == '\n' || c == '\r' || c == ' ') c = in.get();
      if (c == EOF) break;
      std::string word;
      while (c != ' ' && c != EOF) {
        word.push_back(static_cast<char>(c));
        c = in.get();
      }
      if (c == EOF) throw ParseError(path.string() + ": truncated entry for '" + word + "'");
      for (std::size_t k = 0; k < dim; ++k) {
        vec[k] = binio::get_f32(in, "embedding value");
        check_finite(vec[k], word, path);
      }
      accept(std::move(word));
    }
  }
  if (entries != vocab) {
    throw ParseError(path.string() + ": header declares " + std::to_string(vocab) + " words, found " +
                     std::to_string(entries));
  }
  return EmbeddingMatrix(dim, std::move(words), std::move(rows));
}

void write_word2vec(const EmbeddingMatrix& matrix, const fs::path& path, EmbeddingFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << matrix.size() << ' ' << matrix.dim() << '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << matrix.words()[i];
    const float* r = matrix.row(i);
    if (format == EmbeddingFormat::text) {
      char buf[32];
      for (std::size_t k = 0; k < matrix.dim(); ++k) {
        const auto res = std::to_chars(buf, buf + sizeof buf, r[k]);
        out << ' ';
        out.write(buf, res.ptr - buf);
      }
    } else {
      out << ' ';
      for (std::size_t k = 0; k < matrix.dim(); ++k) binio::put_f32(out, r[k]);
    }
    out << '\n';
  }
  if (!out) throw RuntimeError("write failed for " + path.string());
}

EmbeddingSequence embed(const EmbeddingMatrix& matrix, const TokenSequence& tokens) {
  EmbeddingSequence seq;
  seq.vectors = Eigen::MatrixXf::Zero(static_cast<Eigen::Index>(matrix.dim()),
                                      static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (const float* r = matrix.find(tokens[i])) {
      seq.vectors.col(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::VectorXf>(r, static_cast<Eigen::Index>(matrix.dim()));
    }
  }
  return seq;
}

EmbeddingSequence concat_contextual(const EmbeddingSequence& seq, const Eigen::MatrixXf& contextual,
                                    const std::string& sentence_id) {
  if (contextual.cols() != seq.length()) {
    throw ValidationError("sentence '" + sentence_id + "': " + std::to_string(seq.length()) +
                          " tokens but " + std::to_string(contextual.cols()) + " contextual vectors");
  }
  EmbeddingSequence out;
  out.vectors.resize(seq.dim() + contextual.rows(), seq.length());
  out.vectors.topRows(seq.dim()) = seq.vectors;
  out.vectors.bottomRows(contextual.rows()) = contextual;
  return out;
}

void ContextualVectorFile::add(const std::string& id, Eigen::MatrixXf vectors) {
  if (vectors.rows() != static_cast<Eigen::Index>(dim_)) {
    throw ValidationError("contextual vectors for '" + id + "' have dim " + std::to_string(vectors.rows()) +
                          ", expected " + std::to_string(dim_));
  }
  if (!vectors.allFinite()) throw ValidationError("non-finite contextual vector for '" + id + "'");
  if (!records_.emplace(id, std::move(vectors)).second) {
    throw ValidationError("duplicate contextual record '" + id + "'");
  }
}

const Eigen::MatrixXf* ContextualVectorFile::find(const std::string& id) const {
  const auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

namespace {
constexpr char kContextMagic[9] = "CSDCTXV1";
}

void ContextualVectorFile::write(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  binio::put_magic(out, kContextMagic);
  binio::put_u32(out, kVersion);
  binio::put_u32(out, dim_);
  for (const auto& [id, m] : records_) {
    binio::put_string(out, id);
    binio::put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
      for (Eigen::Index k = 0; k < m.rows(); ++k) binio::put_f32(out, m(k, t));
    }
  }
  if (!out) throw RuntimeError("write failed for " + path.string());
}

ContextualVectorFile ContextualVectorFile::read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    binio::expect_magic(in, kContextMagic, "contextual vector");
    if (binio::get_u32(in, "version") != kVersion) throw ParseError("unsupported contextual file version");
    ContextualVectorFile file(binio::get_u32(in, "dim"));
    if (file.dim_ == 0) throw ParseError("contextual dim must be positive");
    while (in.peek() != EOF) {
      const std::string id = binio::get_string(in, 1u << 20, "record id");
      const std::uint32_t n = binio::get_u32(in, "token count");
      Eigen::MatrixXf m(file.dim_, n);
      for (std::uint32_t t = 0; t < n; ++t) {
        for (std::uint32_t k = 0; k < file.dim_; ++k) m(k, t) = binio::get_f32(in, "contextual value");
      }
      file.add(id, std::move(m));
    }
    return file;
  } catch (const ValidationError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace causal
