#include "causal/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "causal/binary_io.hpp"
#include "causal/error.hpp"

namespace causal::nn {

namespace fs = std::filesystem;

namespace {
constexpr char kMagic[9] = "CSDCKPT1";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagContextual = 1u << 0;
constexpr std::uint32_t kFlagFloat64 = 1u << 1;
}  // namespace

void save_checkpoint(const Checkpoint& ck, const fs::path& path) {
  ck.params.validate();
  std::ostringstream out(std::ios::binary);
  binio::put_magic(out, kMagic);
  binio::put_u32(out, kVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(ck.params.input_dim()));
  binio::put_u32(out, static_cast<std::uint32_t>(ck.params.hidden_dim()));
  std::uint32_t flags = 0;
  if (ck.contextual) flags |= kFlagContextual;
  if (ck.config.precision == Precision::float64) flags |= kFlagFloat64;
  binio::put_u32(out, flags);
  binio::put_u64(out, ck.seed);
  binio::put_u32(out, static_cast<std::uint32_t>(ck.best_epoch));
  binio::put_f64(out, ck.best_val_f1);
  binio::put_string(out, ck.config.to_text());
  binio::put_string(out, ck.provenance);
  std::uint32_t blocks = 0;
  for_each_tensor(ck.params, [&](const std::string&, const auto&) { ++blocks; });
  binio::put_u32(out, blocks);
  for_each_tensor(ck.params, [&](const std::string& name, const auto& t) {
    binio::put_string(out, name);
    binio::put_u32(out, static_cast<std::uint32_t>(t.rows()));
    binio::put_u32(out, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) binio::put_f32(out, t.data()[i]);
  });

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw RuntimeError("cannot write " + tmp.string());
    const std::string bytes = out.str();
    file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!file) throw RuntimeError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  try {
    binio::expect_magic(in, kMagic, "checkpoint");
    if (binio::get_u32(in, "version") != kVersion) throw ParseError("unsupported checkpoint version");
    const std::uint32_t d_e = binio::get_u32(in, "d_e");
    const std::uint32_t d_h = binio::get_u32(in, "d_h");
    if (d_e == 0 || d_h == 0 || d_e > (1u << 20) || d_h > (1u << 16)) throw ParseError("implausible dimensions");
    const std::uint32_t flags = binio::get_u32(in, "flags");
    Checkpoint ck;
    ck.params = BiGruAttParams<float>(d_e, d_h);
    ck.contextual = (flags & kFlagContextual) != 0;
    ck.seed = binio::get_u64(in, "seed");
    ck.best_epoch = static_cast<int>(binio::get_u32(in, "best epoch"));
    ck.best_val_f1 = binio::get_f64(in, "best validation F1");

    std::istringstream config(binio::get_string(in, 1u << 20, "config"));
    std::string line;
    while (std::getline(config, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("bad config line '" + line + "'");
      ck.config.set(line.substr(0, eq), line.substr(eq + 1));
    }
    ck.provenance = binio::get_string(in, 1u << 24, "provenance");

    const std::uint32_t blocks = binio::get_u32(in, "block count");
    std::uint32_t expected = 0;
    for_each_tensor(ck.params, [&](const std::string&, const auto&) { ++expected; });
    if (blocks != expected) throw ParseError("unexpected number of parameter blocks");
    for_each_tensor(ck.params, [&](const std::string& name, auto& t) {
      const std::string got = binio::get_string(in, 256, "block name");
      if (got != name) throw ParseError("expected block '" + name + "', found '" + got + "'");
      const std::uint32_t rows = binio::get_u32(in, "rows");
      const std::uint32_t cols = binio::get_u32(in, "cols");
      if (rows != t.rows() || cols != t.cols()) throw ParseError("block '" + name + "' has the wrong shape");
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = binio::get_f32(in, "parameter");
    });
    if (in.peek() != EOF) throw ParseError("trailing bytes");
    return ck;
  } catch (const ValidationError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace causal::nn
