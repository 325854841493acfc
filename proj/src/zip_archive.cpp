// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/zip_archive.hpp"

#include <zlib.h>

#include <cstdint>

#include "fed/error.hpp"

namespace fed {
namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
// 1980-01-01 00:00:00 in DOS format.
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t crc_of(std::string_view data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t pos = 0;
  while (pos < data.size()) {
    const std::size_t n = std::min<std::size_t>(data.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + pos), static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  Reader(std::string_view buf, const std::string& source) : buf_(buf), source_(source) {}

  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return static_cast<std::uint16_t>(byte(at) | (byte(at + 1) << 8));
  }
  std::uint32_t u32(std::size_t at) const {
    need(at, 4);
    return byte(at) | (byte(at + 1) << 8) | (byte(at + 2) << 16) |
           (static_cast<std::uint32_t>(byte(at + 3)) << 24);
  }
  std::string_view slice(std::size_t at, std::size_t n) const {
    need(at, n);
    return buf_.substr(at, n);
  }
  std::size_t size() const { return buf_.size(); }

 private:
  std::uint32_t byte(std::size_t at) const { return static_cast<unsigned char>(buf_[at]); }
  void need(std::size_t at, std::size_t n) const {
    if (at > buf_.size() || n > buf_.size() - at) {
      throw FormatError(source_ + ": truncated zip archive");
    }
  }

  std::string_view buf_;
  const std::string& source_;
};

}  // namespace

std::string zip_encode(const std::vector<ZipEntry>& entries) {
  std::string out;
  std::string central;
  for (const auto& e : entries) {
    if (e.data.size() > 0xffffffffu || out.size() > 0xffffffffu) {
      throw FormatError("zip entry '" + e.name + "' exceeds 4 GiB (zip64 unsupported)");
    }
    const auto offset = static_cast<std::uint32_t>(out.size());
    const std::uint32_t crc = crc_of(e.data);
    const auto size = static_cast<std::uint32_t>(e.data.size());
    const auto name_len = static_cast<std::uint16_t>(e.name.size());

    put32(out, kLocalSig);
    put16(out, 20);  // version needed
    put16(out, 0);   // flags
    put16(out, 0);   // stored
    put16(out, 0);   // time
    put16(out, kDosDate);
    put32(out, crc);
    put32(out, size);
    put32(out, size);
    put16(out, name_len);
    put16(out, 0);
    out.append(e.name);
    out.append(e.data);

    put32(central, kCentralSig);
    put16(central, 20);  // version made by
    put16(central, 20);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosDate);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, name_len);
    put16(central, 0);  // extra
    put16(central, 0);  // comment
    put16(central, 0);  // disk
    put16(central, 0);  // internal attrs
    put32(central, 0);  // external attrs
    put32(central, offset);
    central.append(e.name);
  }
  const auto central_offset = static_cast<std::uint32_t>(out.size());
  out.append(central);
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, central_offset);
  put16(out, 0);
  return out;
}

std::vector<ZipEntry> zip_decode(std::string_view archive, const std::string& source) {
  Reader r(archive, source);
  if (r.size() < 22) throw FormatError(source + ": truncated zip archive");
  std::size_t end = std::string_view::npos;
  const std::size_t lowest = r.size() >= 22 + 0xffff ? r.size() - 22 - 0xffff : 0;
  for (std::size_t at = r.size() - 22 + 1; at-- > lowest;) {
    if (r.u32(at) == kEndSig) {
      end = at;
      break;
    }
  }
  if (end == std::string_view::npos) {
    throw FormatError(source + ": no zip end-of-central-directory record (truncated?)");
  }
  const std::uint16_t count = r.u16(end + 10);
  std::size_t at = r.u32(end + 16);

  std::vector<ZipEntry> entries;
  entries.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) {
    if (r.u32(at) != kCentralSig) throw FormatError(source + ": corrupt central directory");
    const std::uint16_t method = r.u16(at + 10);
    const std::uint32_t crc = r.u32(at + 16);
    const std::uint32_t csize = r.u32(at + 20);
    const std::uint32_t usize = r.u32(at + 24);
    const std::uint16_t name_len = r.u16(at + 28);
    const std::uint16_t extra_len = r.u16(at + 30);
    const std::uint16_t comment_len = r.u16(at + 32);
    const std::uint32_t local = r.u32(at + 42);
    std::string name(r.slice(at + 46, name_len));
    at += 46 + name_len + extra_len + comment_len;

    if (method != 0 || csize != usize) {
      throw FormatError(source + ": entry '" + name + "' is compressed; only stored entries are supported");
    }
    if (r.u32(local) != kLocalSig) {
      throw FormatError(source + ": corrupt local header for '" + name + "'");
    }
    const std::size_t data_at = local + 30 + r.u16(local + 26) + r.u16(local + 28);
    if (data_at > r.size() || usize > r.size() - data_at) {
      throw FormatError(source + ": entry '" + name + "' is truncated");
    }
    std::string data(r.slice(data_at, usize));
    if (crc_of(data) != crc) {
      throw FormatError(source + ": CRC mismatch in entry '" + name + "'");
    }
    entries.push_back({std::move(name), std::move(data)});
  }
  return entries;
}

}  // namespace fed
