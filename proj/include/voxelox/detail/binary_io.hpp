#pragma once

// Little-endian encoding helpers shared by the on-disk formats.

#include "voxelox/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace voxelox::detail {

class ByteWriter {
public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2,
                                                                       std::uint16_t,
                                                                       std::uint8_t>>>;
    U bits;
    std::memcpy(&bits, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFU));
    }
  }

  void put_bytes(std::string_view bytes) { buf_.append(bytes); }

  const std::string& bytes() const { return buf_; }

  void write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + path.string() + " for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw_io("write failed: " + path.string());
  }

private:
  std::string buf_;
};

class ByteReader {
public:
  ByteReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  static ByteReader from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(data), path.string());
  }

  template <typename T>
  T get(std::string_view field) {
    static_assert(std::is_arithmetic_v<T>);
    require(sizeof(T), field);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2,
                                                                       std::uint16_t,
                                                                       std::uint8_t>>>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
  }

  std::string get_bytes(std::size_t n, std::string_view field) {
    require(n, field);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void expect_magic(std::string_view magic) {
    if (remaining() < magic.size() || std::string_view(data_).substr(pos_, magic.size()) != magic) {
      throw_validation(name_ + ": bad magic bytes (expected '" + std::string(magic) + "')");
    }
    pos_ += magic.size();
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& name() const { return name_; }

  void expect_end() const {
    if (remaining() != 0) {
      throw_validation(name_ + ": " + std::to_string(remaining()) + " trailing bytes");
    }
  }

private:
  void require(std::size_t n, std::string_view field) const {
    if (remaining() < n) {
      throw_validation(name_ + ": truncated while reading " + std::string(field));
    }
  }

  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace voxelox::detail
