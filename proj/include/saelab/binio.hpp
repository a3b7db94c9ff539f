#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "saelab/common.hpp"

// Little-endian binary file primitives used by the SAEW/SAED/SAEL formats.
// Readers track their position so truncation errors can name expected vs
// actual byte counts; writers buffer in memory and land atomically via a
// temp file and rename.

namespace saelab::binio {

static_assert(sizeof(double) == 8 && sizeof(float) == 4);

class Writer {
 public:
  void magic(const char tag[4]) { bytes(tag, 4); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v)); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    le(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits);
  }
  void bytes(const void* p, std::size_t count) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + count);
  }

  // write buffer to path.tmp.<suffix>, then rename over path
  void commit(const std::string& path) const;

 private:
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
  }
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& path);

  void expect_magic(const char tag[4]);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  float f32();
  double f64();
  std::string fixed_string(std::size_t count);  // trailing NULs stripped
  bool at_end() const { return pos_ >= buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }
  const std::string& path() const { return path_; }

  // raise the truncation error unless at least `count` bytes remain
  void need(std::size_t count) const;

 private:
  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  std::string path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace saelab::binio
