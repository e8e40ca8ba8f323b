#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "uniret/error.hpp"

namespace uniret {

// Little-endian readers/writers assembled byte by byte, so the on-disk
// formats do not depend on host endianness.
class BinWriter {
 public:
  explicit BinWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) raise(ErrorKind::Io, "binary write failed");
  }

  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }

  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }

  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }

  void str_u32(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  void put_le(std::uint64_t v, int width) {
    char buf[8];
    for (int i = 0; i < width; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    bytes(buf, static_cast<std::size_t>(width));
  }

  std::ostream& out_;
};

class BinReader {
 public:
  explicit BinReader(std::istream& in) : in_(in) {}

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      raise(ErrorKind::TruncatedFile, "unexpected end of file");
  }

  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string str_u32(std::uint32_t max_len = 1u << 20) {
    const std::uint32_t n = u32();
    if (n > max_len) raise(ErrorKind::TruncatedFile, "string length out of range");
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }

  bool at_eof() { return in_.peek() == std::istream::traits_type::eof(); }

 private:
  std::uint64_t get_le(int width) {
    unsigned char buf[8];
    bytes(buf, static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }

  std::istream& in_;
};

}  // namespace uniret
