/* SPDX-License-Identifier: Apache-2.0 */

#include "nseen/binary_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <istream>
#include <iterator>

#include "nseen/error.hpp"

namespace nseen::binio {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers.
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(crc);
}

void Writer::u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

void Writer::u32(std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf_.append(b, 4);
}

void Writer::u64(std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  buf_.append(b, 8);
}

void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Writer::str(std::string_view s) {
  u64(s.size());
  buf_.append(s);
}

void Writer::f64s(std::span<const double> values) {
  const auto old = buf_.size();
  buf_.resize(old + values.size() * sizeof(double));
  if (!values.empty()) std::memcpy(buf_.data() + old, values.data(), values.size() * sizeof(double));
}

std::string_view Reader::take(std::size_t n) {
  if (n > remaining()) throw FormatError("unexpected end of data");
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t Reader::u8() { return static_cast<std::uint8_t>(take(1)[0]); }

std::uint32_t Reader::u32() {
  std::uint32_t v;
  std::memcpy(&v, take(4).data(), 4);
  return v;
}

std::uint64_t Reader::u64() {
  std::uint64_t v;
  std::memcpy(&v, take(8).data(), 8);
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::str() {
  const auto n = u64();
  return std::string(take(n));
}

void Reader::f64s(std::span<double> out) {
  if (out.size() > remaining() / sizeof(double)) throw FormatError("unexpected end of data");
  const auto bytes = take(out.size() * sizeof(double));
  if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
}

std::string frame(std::string_view magic, std::uint32_t version, std::string_view payload) {
  Writer w;
  std::string out(magic);
  w.u32(version);
  w.u64(payload.size());
  out += w.bytes();
  out += payload;
  Writer tail;
  tail.u32(crc32(out));
  out += tail.bytes();
  return out;
}

std::string unframe(std::string_view bytes, std::string_view magic, std::uint32_t version) {
  if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic) {
    throw FormatError("bad magic: expected '" + std::string(magic) + "'");
  }
  Reader r(bytes.substr(magic.size()));
  const auto got_version = r.u32();
  if (got_version != version) {
    throw FormatError("unsupported format version " + std::to_string(got_version) + " (expected " +
                      std::to_string(version) + ")");
  }
  const auto len = r.u64();
  if (len > r.remaining() || r.remaining() - len != 4) {
    throw FormatError("truncated or oversized payload");
  }
  const std::size_t header = magic.size() + 12;
  const auto body = bytes.substr(0, header + len);
  Reader tail(bytes.substr(header + len));
  if (tail.u32() != crc32(body)) throw IntegrityError("checksum mismatch");
  return std::string(bytes.substr(header, len));
}

std::string read_all(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace nseen::binio
