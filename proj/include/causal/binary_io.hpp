#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "causal/error.hpp"

// Little-endian primitives shared by the binary file formats.
namespace causal::binio {

namespace detail {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    if constexpr (sizeof(U) == 4) return __builtin_bswap32(v);
    if constexpr (sizeof(U) == 8) return __builtin_bswap64(v);
  }
  return v;
}

}  // namespace detail

inline void put_u32(std::ostream& out, std::uint32_t v) {
  v = detail::to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  v = detail::to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
inline void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void need(std::istream& in, const char* what) {
  if (!in) throw ParseError(std::string("truncated input while reading ") + what);
}

inline std::uint32_t get_u32(std::istream& in, const char* what = "u32") {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  need(in, what);
  return detail::to_little(v);
}

inline std::uint64_t get_u64(std::istream& in, const char* what = "u64") {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  need(in, what);
  return detail::to_little(v);
}

inline float get_f32(std::istream& in, const char* what = "f32") {
  return std::bit_cast<float>(get_u32(in, what));
}

inline double get_f64(std::istream& in, const char* what = "f64") {
  return std::bit_cast<double>(get_u64(in, what));
}

inline std::string get_string(std::istream& in, std::uint32_t max_len = 1u << 26,
                              const char* what = "string") {
  const std::uint32_t n = get_u32(in, what);
  if (n > max_len) throw ParseError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  need(in, what);
  return s;
}

inline void put_magic(std::ostream& out, const char (&magic)[9]) { out.write(magic, 8); }

inline void expect_magic(std::istream& in, const char (&magic)[9], const char* format) {
  char buf[8] = {};
  in.read(buf, 8);
  if (!in || std::memcmp(buf, magic, 8) != 0) {
    throw ParseError(std::string("not a ") + format + " file (bad magic)");
  }
}

}  // namespace causal::binio
