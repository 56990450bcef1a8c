/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

namespace nseen::binio {

/// CRC-32 (zlib polynomial) of a byte range.
std::uint32_t crc32(std::string_view bytes);

/// Little-endian append-only encoder.
class Writer {
 public:
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);  // u64 length + bytes
  void f64s(std::span<const double> values);

  const std::string& bytes() const noexcept { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked little-endian decoder. Running past the end throws
/// FormatError.
class Reader {
 public:
  explicit Reader(std::string_view bytes) : data_(bytes) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  void f64s(std::span<double> out);

  bool done() const noexcept { return pos_ == data_.size(); }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::string_view take(std::size_t n);

  std::string_view data_;
  std::size_t pos_ = 0;
};

/// Framed artifact: 4 magic bytes, u32 version, u64 payload length,
/// payload, u32 CRC-32 over everything before it.
std::string frame(std::string_view magic, std::uint32_t version, std::string_view payload);

/// Validates the frame and returns the payload. Wrong magic, wrong version
/// or truncation raise FormatError; a checksum mismatch raises
/// IntegrityError.
std::string unframe(std::string_view bytes, std::string_view magic, std::uint32_t version);

std::string read_all(std::istream& in);

}  // namespace nseen::binio
