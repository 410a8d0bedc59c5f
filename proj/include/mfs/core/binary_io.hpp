#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mfs/core/errors.hpp"

namespace mfs::io {

namespace detail {

template <typename T>
T to_little(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return value;
  } else {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }
}

}  // namespace detail

/// Little-endian serializer into an in-memory buffer.
class Writer {
 public:
  void magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

  template <typename T>
  void put(T value) {
    value = detail::to_little(value);
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  template <typename T>
  void put_array(std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const char*>(values.data());
      bytes_.insert(bytes_.end(), p, p + values.size_bytes());
    } else {
      for (const T& v : values) put(v);
    }
  }

  /// Converts each element to `Stored` before writing.
  template <typename Stored, typename T>
  void put_converted(std::span<const T> values) {
    if constexpr (std::is_same_v<Stored, T>) {
      put_array(values);
    } else {
      for (const T& v : values) put(static_cast<Stored>(v));
    }
  }

  void put_string16(std::string_view s) {
    if (s.size() > 0xFFFF) throw ArgumentError("string too long for u16 length prefix");
    put(static_cast<std::uint16_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  const std::vector<char>& bytes() const noexcept { return bytes_; }

  void write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot open '" + path + "' for writing");
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw FileError("write to '" + path + "' failed");
  }

 private:
  std::vector<char> bytes_;
};

/// Little-endian deserializer over a byte buffer. Every failure reports the
/// byte offset at which it happened.
class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  static Reader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FileError("cannot open '" + path + "' for reading");
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<char> bytes(size);
    in.seekg(0);
    in.read(bytes.data(), static_cast<std::streamsize>(size));
    if (!in) throw FileError("read of '" + path + "' failed");
    return Reader(std::move(bytes));
  }

  std::uint64_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }

  void expect_magic(std::string_view tag) {
    require(tag.size(), "magic");
    if (std::string_view(bytes_.data() + pos_, tag.size()) != tag)
      throw FormatError("bad magic, expected '" + std::string(tag) + "'", pos_);
    pos_ += tag.size();
  }

  template <typename T>
  T get(const char* what = "value") {
    require(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return detail::to_little(value);
  }

  template <typename T>
  void get_array(std::span<T> out, const char* what = "array") {
    require(out.size_bytes(), what);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (auto& v : out) v = get<T>(what);
    }
  }

  template <typename Stored, typename T>
  void get_converted(std::span<T> out, const char* what = "array") {
    if constexpr (std::is_same_v<Stored, T>) {
      get_array(out, what);
    } else {
      require(out.size() * sizeof(Stored), what);
      for (auto& v : out) v = static_cast<T>(get<Stored>(what));
    }
  }

  std::string get_string16(const char* what = "string") {
    const auto n = get<std::uint16_t>(what);
    require(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void expect_end() const {
    if (!at_end()) throw FormatError("trailing bytes after payload", pos_);
  }

  /// Throws unless `count` more bytes are available.
  void require(std::uint64_t count, const char* what) const {
    if (count > remaining())
      throw FormatError(std::string("truncated file while reading ") + what, pos_);
  }

 private:
  std::vector<char> bytes_;
  std::uint64_t pos_ = 0;
};

}  // namespace mfs::io
