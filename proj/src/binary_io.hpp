#pragma once

// Little-endian primitives shared by the checkpoint and index formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "dcsr/errors.hpp"

namespace dcsr::detail {

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

class ByteWriter {
 public:
  void bytes(std::string_view data) { buffer_.append(data.data(), data.size()); }

  template <typename T>
  void put(T value) {
    value = to_little(value);
    const auto* p = reinterpret_cast<const char*>(&value);
    buffer_.append(p, sizeof(T));
  }

  const std::string& buffer() const { return buffer_; }
  void reserve(std::size_t n) { buffer_.reserve(n); }

 private:
  std::string buffer_;
};

/// Bounds-checked reader; running past the end raises `error_kind`.
class ByteReader {
 public:
  ByteReader(std::string_view data, ErrorKind error_kind) : data_(data), error_kind_(error_kind) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(value);
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail(error_kind_, "unexpected end of file");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  ErrorKind error_kind_;
};

std::string read_binary_file(const std::string& path, ErrorKind missing_kind);
void write_binary_file(const std::string& path, const std::string& content);

}  // namespace dcsr::detail
