#include "saelab/binio.hpp"

#include <cstdio>
#include <filesystem>
#include <random>
#include <system_error>

namespace saelab::binio {

namespace fs = std::filesystem;

void Writer::commit(const std::string& path) const {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(
      std::hash<std::string>{}(path) ^ static_cast<std::size_t>(std::random_device{}()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("rename failed for " + path + ": " + ec.message());
  }
}

Reader::Reader(const std::string& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0, std::ios::beg);
  buf_.resize(static_cast<std::size_t>(size));
  if (size > 0) in.read(buf_.data(), size);
  if (!in) throw IoError("read failed: " + path);
}

void Reader::need(std::size_t count) const {
  if (pos_ + count > buf_.size()) {
    throw FormatError("truncated file " + path_ + ": expected at least " +
                      std::to_string(pos_ + count) + " bytes, have " +
                      std::to_string(buf_.size()));
  }
}

void Reader::expect_magic(const char tag[4]) {
  need(4);
  if (std::memcmp(buf_.data() + pos_, tag, 4) != 0) {
    throw FormatError("bad magic in " + path_ + ": expected \"" +
                      std::string(tag, 4) + "\", found \"" +
                      std::string(buf_.data() + pos_, 4) + "\"");
  }
  pos_ += 4;
}

std::uint8_t Reader::u8() { return le<std::uint8_t>(); }
std::uint32_t Reader::u32() { return le<std::uint32_t>(); }
std::uint64_t Reader::u64() { return le<std::uint64_t>(); }
std::int64_t Reader::i64() { return static_cast<std::int64_t>(le<std::uint64_t>()); }

float Reader::f32() {
  const std::uint32_t bits = le<std::uint32_t>();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double Reader::f64() {
  const std::uint64_t bits = le<std::uint64_t>();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string Reader::fixed_string(std::size_t count) {
  need(count);
  std::string s(buf_.data() + pos_, count);
  pos_ += count;
  while (!s.empty() && s.back() == '\0') s.pop_back();
  return s;
}

}  // namespace saelab::binio
