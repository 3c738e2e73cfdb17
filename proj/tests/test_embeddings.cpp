#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "causal/embeddings.hpp"
#include "causal/error.hpp"
#include "causal/random.hpp"

namespace fs = std::filesystem;
using namespace causal;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("causal_test_emb_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

EmbeddingMatrix random_matrix(std::size_t v, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> words;
  std::vector<float> rows;
  for (std::size_t i = 0; i < v; ++i) {
    words.push_back("w" + std::to_string(i) + (i % 3 == 0 ? "\xc3\xa9" : ""));
    for (std::size_t k = 0; k < d; ++k) rows.push_back(static_cast<float>(rng.uniform(-3.0, 3.0)));
  }
  return EmbeddingMatrix(d, words, rows);
}

bool same_bits(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.dim() != b.dim() || a.words() != b.words()) return false;
  return std::memcmp(a.row(0), b.row(0), a.size() * a.dim() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("text file with three words") {
  const auto dir = scratch("text3");
  std::ofstream(dir / "v.txt") << "3 4\nrain 0.1 0.2 0.3 0.4\nfloods -1 0 1 2.5\ncause 1e-3 2 3 4\n";
  const auto m = load_word2vec(dir / "v.txt", EmbeddingFormat::text);
  CHECK(m.size() == 3);
  CHECK(m.dim() == 4);
  REQUIRE(m.find("floods") != nullptr);
  CHECK(m.find("floods")[3] == 2.5f);
  CHECK(m.find("drought") == nullptr);
}

TEST_CASE("binary round trip is bit exact") {
  const auto dir = scratch("bin");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = random_matrix(20 + seed, 7 + seed, seed);
    write_word2vec(m, dir / "v.bin", EmbeddingFormat::binary);
    const auto back = load_word2vec(dir / "v.bin", EmbeddingFormat::binary);
    CHECK(same_bits(m, back));
    CHECK(back.checksum() == m.checksum());
  }
}

TEST_CASE("text and binary agree") {
  const auto dir = scratch("agree");
  const auto m = random_matrix(30, 5, 9);
  write_word2vec(m, dir / "v.txt", EmbeddingFormat::text);
  write_word2vec(m, dir / "v.bin", EmbeddingFormat::binary);
  const auto t = load_word2vec(dir / "v.txt", EmbeddingFormat::text);
  const auto b = load_word2vec(dir / "v.bin", EmbeddingFormat::binary);
  CHECK(same_bits(t, b));
}

TEST_CASE("load errors") {
  const auto dir = scratch("errors");
  std::ofstream(dir / "extra.txt") << "2 2\na 1 2\nb 3 4\nc 5 6\n";
  CHECK_THROWS_AS(load_word2vec(dir / "extra.txt", EmbeddingFormat::text), ValidationError);
  std::ofstream(dir / "short.txt") << "3 2\na 1 2\nb 3 4\n";
  CHECK_THROWS_AS(load_word2vec(dir / "short.txt", EmbeddingFormat::text), ValidationError);
  std::ofstream(dir / "nan.txt") << "1 2\na nan 2\n";
  CHECK_THROWS_AS(load_word2vec(dir / "nan.txt", EmbeddingFormat::text), ValidationError);
  std::ofstream(dir / "width.txt") << "1 3\na 1 2\n";
  CHECK_THROWS_AS(load_word2vec(dir / "width.txt", EmbeddingFormat::text), ValidationError);

  const auto m = random_matrix(3, 4, 1);
  write_word2vec(m, dir / "v.bin", EmbeddingFormat::binary);
  std::string bytes;
  {
    std::ifstream in(dir / "v.bin", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }
  bytes[0] = '2';
  std::ofstream(dir / "v2.bin", std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_word2vec(dir / "v2.bin", EmbeddingFormat::binary), ValidationError);
  std::ofstream(dir / "trunc.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 9).replace(0, 1, "3");
  CHECK_THROWS_AS(load_word2vec(dir / "trunc.bin", EmbeddingFormat::binary), ValidationError);
}

TEST_CASE("duplicates keep the first row") {
  const EmbeddingMatrix m(2, {"a", "b", "a"}, {1, 2, 3, 4, 5, 6});
  CHECK(m.size() == 2);
  CHECK(m.duplicates_dropped() == 1);
  CHECK(m.find("a")[0] == 1.0f);
}

TEST_CASE("keep filter") {
  const auto dir = scratch("keep");
  write_word2vec(random_matrix(10, 3, 4), dir / "v.txt", EmbeddingFormat::text);
  const std::unordered_set<std::string> keep = {"w1", "w2", "absent"};
  const auto m = load_word2vec(dir / "v.txt", EmbeddingFormat::text, {&keep});
  CHECK(m.size() == 2);
  CHECK(m.find("w0\xc3\xa9") == nullptr);
}

TEST_CASE("embed lookup and OOV policy") {
  const EmbeddingMatrix m(3, {"rain", "causes", "floods"}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  SUBCASE("all OOV") {
    const auto s = embed(m, {"x", "y"});
    CHECK(s.length() == 2);
    CHECK(s.dim() == 3);
    CHECK(s.vectors.isZero(0));
  }
  SUBCASE("known token equals its row") {
    const auto s = embed(m, {"causes"});
    for (int k = 0; k < 3; ++k) CHECK(s.vectors(k, 0) == m.find("causes")[k]);
  }
  SUBCASE("mixed sentence") {
    const auto s = embed(m, {"rain", "heavy", "causes", "sudden", "floods"});
    REQUIRE(s.length() == 5);
    std::vector<int> zero_cols;
    for (int i = 0; i < 5; ++i) {
      if (s.vectors.col(i).isZero(0)) zero_cols.push_back(i);
    }
    CHECK(zero_cols == std::vector<int>{1, 3});
  }
}

TEST_CASE("contextual concatenation") {
  const auto m = random_matrix(5, 200, 2);
  const auto seq = embed(m, {"w1", "w2", "w4", "nope", "w3"});

  Eigen::MatrixXf ctx = Eigen::MatrixXf::Random(1024, 5);
  const auto out = concat_contextual(seq, ctx, "s1");
  CHECK(out.dim() == 1224);
  CHECK(out.length() == 5);
  CHECK(out.vectors.bottomRows(1024) == ctx);

  const auto zero = concat_contextual(seq, Eigen::MatrixXf::Zero(1024, 5), "s1");
  CHECK(zero.vectors.topRows(200) == seq.vectors);

  try {
    concat_contextual(seq, Eigen::MatrixXf::Zero(1024, 4), "sent-42");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("sent-42") != std::string::npos);
  }
}

TEST_CASE("contextual vector file round trip") {
  const auto dir = scratch("ctx");
  ContextualVectorFile f(16);
  f.add("b", Eigen::MatrixXf::Random(16, 3));
  f.add("a", Eigen::MatrixXf::Random(16, 1));
  f.write(dir / "c.ctx");
  const auto back = ContextualVectorFile::read(dir / "c.ctx");
  CHECK(back.dim() == 16);
  REQUIRE(back.size() == 2);
  CHECK(*back.find("b") == *f.find("b"));
  CHECK(*back.find("a") == *f.find("a"));
  CHECK(back.find("c") == nullptr);
  CHECK_THROWS_AS(f.add("c", Eigen::MatrixXf::Zero(8, 2)), ValidationError);
}
