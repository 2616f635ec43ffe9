#pragma once

// Versioned little-endian binary envelope shared by the model files:
//
//   magic    4 bytes ("ESPM", "ESRK", ...)
//   version  u32
//   payload  format-specific
//
// Readers reject a foreign magic (BadMagic), an unknown version
// (VersionMismatch), and short or over-long payloads (ShapeMismatch).

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "lcr/error.hpp"

namespace lcr::io {

class Writer {
 public:
  Writer(std::string_view magic, std::uint32_t version) {
    bytes_.insert(bytes_.end(), magic.begin(), magic.end());
    u32(version);
  }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  template <typename Range>
  void f32s(const Range& values) {
    for (auto v : values) f32(static_cast<float>(v));
  }

  const std::vector<char>& bytes() const { return bytes_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw Error(ErrorCode::UnreadableFile, "short write to " + path.string());
  }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string_view magic, std::uint32_t version, std::string origin = "<memory>")
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {
    if (bytes_.size() < magic.size() || std::string_view(bytes_.data(), magic.size()) != magic)
      throw Error(ErrorCode::BadMagic, origin_ + ": expected magic '" + std::string(magic) + "'");
    pos_ = magic.size();
    std::uint32_t v = u32();
    if (v != version)
      throw Error(ErrorCode::VersionMismatch,
                  origin_ + ": format version " + std::to_string(v) + ", expected " + std::to_string(version));
  }

  static Reader open(const std::filesystem::path& path, std::string_view magic, std::uint32_t version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingArtifact, path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(bytes), magic, version, path.string());
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  std::vector<T> f32s(std::size_t count) {
    need(count * 4);
    std::vector<T> out(count);
    for (auto& v : out) v = static_cast<T>(f32());
    return out;
  }

  void expect_end() const {
    if (pos_ != bytes_.size())
      throw Error(ErrorCode::ShapeMismatch, origin_ + ": " + std::to_string(bytes_.size() - pos_) + " trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorCode::ShapeMismatch, origin_ + ": truncated at byte " + std::to_string(pos_));
  }

  std::vector<char> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace lcr::io
