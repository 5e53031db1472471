#pragma once

// Little-endian binary helpers shared by the checkpoint and index formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "tsr/error.hpp"

namespace tsr::detail {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are written from little-endian hosts only");

class Fnv1a {
 public:
  void update(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t digest() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out_) throw IoError("write failed");
    hash_.update(data, size);
  }

  template <typename T>
  void value(T v) {
    static_assert(std::is_arithmetic_v<T>);
    bytes(&v, sizeof v);
  }

  void string(const std::string& s) {
    value(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  /// Appends the running checksum (not itself hashed).
  void checksum() {
    const std::uint64_t d = hash_.digest();
    out_.write(reinterpret_cast<const char*>(&d), sizeof d);
    if (!out_) throw IoError("write failed");
  }

 private:
  std::ostream& out_;
  Fnv1a hash_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size) {
      throw FormatError("truncated file: checksum mismatch (unexpected end of data)");
    }
    hash_.update(data, size);
  }

  template <typename T>
  T value() {
    static_assert(std::is_arithmetic_v<T>);
    T v{};
    bytes(&v, sizeof v);
    return v;
  }

  std::string string(std::uint32_t max_length) {
    const auto n = value<std::uint32_t>();
    if (n > max_length) throw FormatError("string length out of range");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  void verify_checksum() {
    std::uint64_t stored = 0;
    in_.read(reinterpret_cast<char*>(&stored), sizeof stored);
    if (static_cast<std::size_t>(in_.gcount()) != sizeof stored) {
      throw FormatError("truncated file: checksum missing");
    }
    if (stored != hash_.digest()) throw FormatError("checksum mismatch");
  }

 private:
  std::istream& in_;
  Fnv1a hash_;
};

}  // namespace tsr::detail
