#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "ddg/errors.hpp"

namespace ddg {

// Little-endian primitives for the binary file formats. Readers track the
// byte offset so FormatError messages can point at the failure.
struct ByteReader {
  std::istream& in;
  std::uint64_t offset = 0;

  explicit ByteReader(std::istream& s) : in(s) {}

  void read_exact(void* dst, std::size_t n, const char* what);
  std::uint32_t u32(const char* what);
  double f64(const char* what);
  std::string bytes(std::size_t n, const char* what);

  [[noreturn]] void fail(const std::string& msg) const;
};

struct ByteWriter {
  std::ostream& out;

  explicit ByteWriter(std::ostream& s) : out(s) {}

  void write(const void* src, std::size_t n);
  void u32(std::uint32_t v);
  void f64(double v);
  void bytes(const std::string& s);
};

}  // namespace ddg
