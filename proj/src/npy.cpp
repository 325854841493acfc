// Copyright 2026 The fed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fed/npy.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include "fed/error.hpp"

namespace fed {

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are handled as little-endian host memory");

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";

DType parse_descr(const std::string& descr, const std::string& source) {
  if (descr == "<f2") return DType::kFloat16;
  if (descr == "<f4") return DType::kFloat32;
  if (descr == "<f8") return DType::kFloat64;
  if (descr == "|u1" || descr == "<u1") return DType::kUInt8;
  if (descr == "<i4") return DType::kInt32;
  if (descr == "<i8") return DType::kInt64;
  throw FormatError(source + ": unsupported dtype '" + descr + "'");
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = (h & 0x8000u) << 16;
  std::uint32_t exponent = (h >> 10) & 0x1f;
  std::uint32_t mantissa = h & 0x3ff;
  std::uint32_t bits;
  if (exponent == 0) {
    if (mantissa == 0) {
      bits = sign;
    } else {
      // Subnormal half: renormalize.
      exponent = 127 - 15 + 1;
      while ((mantissa & 0x400u) == 0) {
        mantissa <<= 1;
        --exponent;
      }
      mantissa &= 0x3ff;
      bits = sign | (exponent << 23) | (mantissa << 13);
    }
  } else if (exponent == 0x1f) {
    bits = sign | 0x7f800000u | (mantissa << 13);
  } else {
    bits = sign | ((exponent - 15 + 127) << 23) | (mantissa << 13);
  }
  return std::bit_cast<float>(bits);
}

template <typename T>
T load_element(const std::string& bytes, std::size_t i) {
  T v;
  std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
  return v;
}

}  // namespace

std::string_view dtype_descr(DType dtype) {
  switch (dtype) {
    case DType::kFloat16: return "<f2";
    case DType::kFloat32: return "<f4";
    case DType::kFloat64: return "<f8";
    case DType::kUInt8: return "|u1";
    case DType::kInt32: return "<i4";
    case DType::kInt64: return "<i8";
  }
  return "";
}

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat16: return 2;
    case DType::kFloat32: return 4;
    case DType::kFloat64: return 8;
    case DType::kUInt8: return 1;
    case DType::kInt32: return 4;
    case DType::kInt64: return 8;
  }
  return 0;
}

NpyBlob decode_npy(std::string_view file, const std::string& source) {
  if (file.size() < 10 || file.substr(0, 6) != kMagic) {
    throw FormatError(source + ": not an NPY file (bad magic)");
  }
  const auto major = static_cast<unsigned char>(file[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(file[8]) |
                 (static_cast<std::size_t>(static_cast<unsigned char>(file[9])) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (file.size() < 12) throw FormatError(source + ": truncated NPY header");
    for (int i = 0; i < 4; ++i) {
      header_len |= static_cast<std::size_t>(static_cast<unsigned char>(file[8 + i]))
                    << (8 * i);
    }
    offset = 12;
  } else {
    throw FormatError(source + ": unsupported NPY version " + std::to_string(major));
  }
  if (file.size() < offset + header_len) {
    throw FormatError(source + ": truncated NPY header");
  }
  const std::string header(file.substr(offset, header_len));

  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  std::smatch m;
  if (!std::regex_search(header, m, descr_re)) {
    throw FormatError(source + ": NPY header lacks 'descr'");
  }
  NpyBlob blob;
  blob.dtype = parse_descr(m[1].str(), source);
  if (!std::regex_search(header, m, order_re)) {
    throw FormatError(source + ": NPY header lacks 'fortran_order'");
  }
  if (m[1].str() == "True") {
    throw FormatError(source + ": Fortran-ordered arrays are not supported");
  }
  if (!std::regex_search(header, m, shape_re)) {
    throw FormatError(source + ": NPY header lacks 'shape'");
  }
  std::stringstream dims(m[1].str());
  std::string item;
  while (std::getline(dims, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    blob.shape.push_back(static_cast<std::size_t>(std::stoull(item.substr(first))));
  }

  const std::size_t expected = element_count(blob.shape) * dtype_size(blob.dtype);
  const std::size_t available = file.size() - offset - header_len;
  if (available < expected) {
    throw FormatError(source + ": truncated NPY payload (expected " +
                      std::to_string(expected) + " bytes for shape " +
                      shape_string(blob.shape) + ", found " +
                      std::to_string(available) + ")");
  }
  blob.bytes.assign(file.substr(offset + header_len, expected));
  return blob;
}

std::string encode_npy(DType dtype, const Shape& shape, std::string_view bytes) {
  std::string dict = "{'descr': '" + std::string(dtype_descr(dtype)) +
                     "', 'fortran_order': False, 'shape': " + shape_string(shape) +
                     ", }";
  // Pad so that magic + len + header is a multiple of 64 and ends in '\n'.
  const std::size_t unpadded = kMagic.size() + 4 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');

  std::string out;
  out.reserve(10 + dict.size() + bytes.size());
  out.append(kMagic);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(dict.size() & 0xff));
  out.push_back(static_cast<char>((dict.size() >> 8) & 0xff));
  out.append(dict);
  out.append(bytes);
  return out;
}

Tensor blob_to_real(const NpyBlob& blob, const std::string& source) {
  Tensor t(blob.shape);
  const std::size_t n = t.size();
  switch (blob.dtype) {
    case DType::kFloat16:
      for (std::size_t i = 0; i < n; ++i)
        t[i] = half_to_float(load_element<std::uint16_t>(blob.bytes, i));
      break;
    case DType::kFloat32:
      for (std::size_t i = 0; i < n; ++i) t[i] = load_element<float>(blob.bytes, i);
      break;
    case DType::kFloat64:
      for (std::size_t i = 0; i < n; ++i) t[i] = load_element<double>(blob.bytes, i);
      break;
    default:
      throw FormatError(source + ": expected a real dtype (<f2, <f4, <f8), got " +
                        std::string(dtype_descr(blob.dtype)));
  }
  return t;
}

LabelMap blob_to_labels(const NpyBlob& blob, const std::string& source) {
  LabelMap labels(blob.shape);
  const std::size_t n = labels.size();
  switch (blob.dtype) {
    case DType::kUInt8:
      for (std::size_t i = 0; i < n; ++i)
        labels[i] = static_cast<unsigned char>(blob.bytes[i]);
      break;
    case DType::kInt32:
      for (std::size_t i = 0; i < n; ++i)
        labels[i] = load_element<std::int32_t>(blob.bytes, i);
      break;
    case DType::kInt64:
      for (std::size_t i = 0; i < n; ++i)
        labels[i] = static_cast<std::int32_t>(load_element<std::int64_t>(blob.bytes, i));
      break;
    default:
      throw FormatError(source + ": expected an integer dtype (|u1, <i4, <i8), got " +
                        std::string(dtype_descr(blob.dtype)));
  }
  return labels;
}

std::string encode_real(const Tensor& t, DType dtype) {
  std::string bytes;
  if (dtype == DType::kFloat32) {
    bytes.resize(t.size() * sizeof(float));
    for (std::size_t i = 0; i < t.size(); ++i) {
      const float v = static_cast<float>(t[i]);
      std::memcpy(bytes.data() + i * sizeof(float), &v, sizeof(float));
    }
  } else if (dtype == DType::kFloat64) {
    bytes.resize(t.size() * sizeof(double));
    std::memcpy(bytes.data(), t.data.data(), bytes.size());
  } else {
    throw FormatError("encode_real: only <f4 and <f8 outputs are supported");
  }
  return encode_npy(dtype, t.shape, bytes);
}

std::string encode_labels(const LabelMap& labels) {
  std::string bytes(labels.size() * sizeof(std::int32_t), '\0');
  std::memcpy(bytes.data(), labels.data.data(), bytes.size());
  return encode_npy(DType::kInt32, labels.shape, bytes);
}

Tensor load_real_npy(const std::filesystem::path& path) {
  const std::string file = read_file(path);
  return blob_to_real(decode_npy(file, path.string()), path.string());
}

LabelMap load_label_npy(const std::filesystem::path& path) {
  const std::string file = read_file(path);
  return blob_to_labels(decode_npy(file, path.string()), path.string());
}

void save_real_npy(const std::filesystem::path& path, const Tensor& t, DType dtype) {
  write_file_atomic(path, encode_real(t, dtype));
}

void save_label_npy(const std::filesystem::path& path, const LabelMap& labels) {
  write_file_atomic(path, encode_labels(labels));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(path.string() + ": read failed");
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string() + ": cannot open for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError(path.string() + ": rename failed: " + ec.message());
  }
}

}  // namespace fed
