#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "foley/errors.hpp"

// Little-endian primitives for the dataset and checkpoint containers.
namespace foley::detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    le(bits);
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    le(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  template <typename T>
  void le(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    bytes(buf, sizeof buf);
  }
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void bytes(void* p, std::size_t n, const char* field) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(what_ + ": truncated while reading " + field);
    }
  }
  std::uint32_t u32(const char* field) { return le<std::uint32_t>(field); }
  std::uint64_t u64(const char* field) { return le<std::uint64_t>(field); }
  double f64(const char* field) {
    const auto bits = le<std::uint64_t>(field);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  float f32(const char* field) {
    const auto bits = le<std::uint32_t>(field);
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string str(const char* field, std::size_t max_len = 1 << 20) {
    const auto n = u32(field);
    if (n > max_len) throw FormatError(what_ + ": implausible length for " + field);
    std::string s(n, '\0');
    bytes(s.data(), n, field);
    return s;
  }
  const std::string& what() const { return what_; }

 private:
  template <typename T>
  T le(const char* field) {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof buf, field);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
  std::string what_;
};

}  // namespace foley::detail
