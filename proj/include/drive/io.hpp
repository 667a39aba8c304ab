#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "drive/errors.hpp"

namespace drive::io {

using Bytes = std::vector<unsigned char>;

// Writes to `<path>.tmp` then renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const Bytes& bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);
Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Little-endian append/consume helpers.
class ByteWriter {
 public:
  template <typename V>
  void put(V v) {
    static_assert(std::is_trivially_copyable_v<V>);
    unsigned char raw[sizeof(V)];
    std::memcpy(raw, &v, sizeof(V));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(V));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(V));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  template <typename V>
  void put_array(const V* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      put_bytes(data, n * sizeof(V));
    } else {
      for (std::size_t i = 0; i < n; ++i) put(data[i]);
    }
  }
  std::size_t size() const { return bytes_.size(); }
  Bytes& bytes() { return bytes_; }

 private:
  Bytes bytes_;
};

class ByteReader {
 public:
  ByteReader(const Bytes& bytes, std::size_t offset = 0) : bytes_(bytes), pos_(offset) {}

  template <typename V>
  V get() {
    need(sizeof(V));
    unsigned char raw[sizeof(V)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(V));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(V));
    pos_ += sizeof(V);
    V v;
    std::memcpy(&v, raw, sizeof(V));
    return v;
  }
  template <typename V>
  void get_array(V* out, std::size_t n) {
    need(n * sizeof(V));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out, bytes_.data() + pos_, n * sizeof(V));
      pos_ += n * sizeof(V);
    } else {
      for (std::size_t i = 0; i < n; ++i) out[i] = get<V>();
    }
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw FormatError("truncated input: need " + std::to_string(n) + " bytes, " +
                            std::to_string(bytes_.size() - pos_) + " left",
                        pos_);
  }

 private:
  const Bytes& bytes_;
  std::size_t pos_;
};

}  // namespace drive::io
