// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dramtol/error.hpp"

namespace dramtol {

void ByteWriter::f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }

void ByteWriter::raw(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  bytes_.insert(bytes_.end(), p, p + n);
}

std::uint64_t ByteReader::get(int n) {
  if (remaining() < static_cast<std::size_t>(n)) {
    throw Error("truncated", "unexpected end of binary data");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  }
  pos_ += n;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(get(8)); }

void ByteReader::raw(void* out, std::size_t n) {
  if (remaining() < n) throw Error("truncated", "unexpected end of binary data");
  std::memcpy(out, bytes_.data() + pos_, n);
  pos_ += n;
}

std::vector<std::uint8_t> serialize_tensor(const Tensor& t) {
  ByteWriter w;
  w.raw("EDNT", 4);
  w.u8(1);
  w.u8(t.dtype().code());
  w.u8(static_cast<std::uint8_t>(t.shape().size()));
  w.u64(t.size());
  for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  w.f64(t.scale());
  const BitImage img = encode_bits(t);
  const std::size_t nbytes = (img.size_bits() + 7) / 8;
  for (std::size_t i = 0; i < nbytes; ++i) {
    const std::uint64_t word = img.words()[i / 8];
    w.u8(static_cast<std::uint8_t>(word >> (8 * (i % 8))));
  }
  return std::move(w.bytes());
}

Tensor deserialize_tensor(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, "EDNT", 4) != 0) {
    throw Error("bad_magic", "not an EDNT tensor file");
  }
  const auto version = r.u8();
  if (version != 1) {
    throw Error("bad_version", "unsupported EDNT version " + std::to_string(version));
  }
  const Dtype dtype = Dtype::from_code(r.u8());
  const auto rank = r.u8();
  const auto count = r.u64();
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) d = r.u32();
  const double scale = r.f64();
  BitImage img(static_cast<std::size_t>(dtype.bits()), count);
  const std::size_t nbytes = (img.size_bits() + 7) / 8;
  if (r.remaining() != nbytes) {
    throw Error("size_mismatch", "EDNT payload length does not match header");
  }
  for (std::size_t i = 0; i < nbytes; ++i) {
    const auto byte = r.u8();
    for (int b = 0; b < 8; ++b) {
      const std::size_t bit = i * 8 + b;
      if (bit < img.size_bits() && ((byte >> b) & 1)) img.set(bit, true);
    }
  }
  return decode_bits(img, dtype, std::move(shape), scale);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_bytes(path, serialize_tensor(t));
}

Tensor read_tensor(const std::filesystem::path& path) {
  return deserialize_tensor(read_file_bytes(path));
}

}  // namespace dramtol
