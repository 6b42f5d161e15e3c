#include "ddg/serialize.hpp"

#include <cstring>
#include <istream>
#include <ostream>

namespace ddg {

void ByteReader::fail(const std::string& msg) const {
  throw FormatError(msg + " at byte offset " + std::to_string(offset));
}

void ByteReader::read_exact(void* dst, std::size_t n, const char* what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    fail(std::string("truncated ") + what);
  }
  offset += n;
}

std::uint32_t ByteReader::u32(const char* what) {
  unsigned char b[4];
  read_exact(b, 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double ByteReader::f64(const char* what) {
  unsigned char b[8];
  read_exact(b, 8, what);
  std::uint64_t u = 0;
  for (int i = 7; i >= 0; --i) {
    u = (u << 8) | b[i];
  }
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}

std::string ByteReader::bytes(std::size_t n, const char* what) {
  std::string s(n, '\0');
  read_exact(s.data(), n, what);
  return s;
}

void ByteWriter::write(const void* src, std::size_t n) {
  out.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
}

void ByteWriter::u32(std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  write(b, 4);
}

void ByteWriter::f64(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) {
    b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  }
  write(b, 8);
}

void ByteWriter::bytes(const std::string& s) { write(s.data(), s.size()); }

}  // namespace ddg
