// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "srgdiff/error.hpp"

namespace srgdiff::io {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<unsigned char> encode_tensor(std::span<const std::uint32_t> dims,
                                         std::span<const float> data) {
  std::size_t count = 1;
  for (auto d : dims) count *= d;
  if (count != data.size())
    throw ShapeError("tensor payload has " + std::to_string(data.size()) +
                     " values but dims describe " + std::to_string(count));
  for (float v : data)
    if (!std::isfinite(v)) throw NumericalError("refusing to write a non-finite tensor value");

  std::vector<unsigned char> out;
  out.reserve(12 + 4 * dims.size() + 4 * data.size());
  out.resize(8);
  std::memcpy(out.data(), kTensorMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  for (float v : data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

TensorFile decode_tensor(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kTensorMagic, 8) != 0)
    throw FormatError("missing magic", 0);
  std::size_t off = 8;
  if (bytes.size() < off + 4) throw FormatError("truncated header", bytes.size());
  const std::uint32_t rank = get_u32(bytes.data() + off);
  off += 4;
  if (bytes.size() - off < 4ull * rank) throw FormatError("truncated header", bytes.size());

  TensorFile tf;
  tf.dims.resize(rank);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    tf.dims[i] = get_u32(bytes.data() + off);
    if (tf.dims[i] != 0 && count > std::numeric_limits<std::size_t>::max() / 4 / tf.dims[i])
      throw FormatError("dimension overflow", off);
    count *= tf.dims[i];
    off += 4;
  }
  if ((bytes.size() - off) / 4 < count) throw FormatError("truncated payload", bytes.size());
  if (bytes.size() - off != 4 * count) throw FormatError("trailing bytes after payload", off + 4 * count);
  tf.data.resize(count);
  for (std::size_t i = 0; i < count; ++i, off += 4)
    tf.data[i] = std::bit_cast<float>(get_u32(bytes.data() + off));
  return tf;
}

void write_tensor_file(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                       std::span<const float> data) {
  const auto bytes = encode_tensor(dims, data);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

void write_tensor(const std::filesystem::path& path, const nn::Tensor& t) {
  std::vector<std::uint32_t> dims(t.shape().begin(), t.shape().end());
  std::vector<float> data(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) data[i] = static_cast<float>(t[i]);
  write_tensor_file(path, dims, data);
}

nn::Tensor read_tensor(const std::filesystem::path& path) {
  TensorFile tf = read_tensor_file(path);
  nn::Shape shape(tf.dims.begin(), tf.dims.end());
  return nn::Tensor(std::move(shape), std::vector<double>(tf.data.begin(), tf.data.end()));
}

nn::Tensor to_tensor(const Signal& s) {
  nn::Tensor t({static_cast<std::size_t>(s.rows()), static_cast<std::size_t>(s.cols())});
  std::memcpy(t.data(), s.data(), sizeof(double) * t.size());
  return t;
}

Signal to_signal(const nn::Tensor& t) {
  if (t.rank() != 2) throw ShapeError("signal tensor must be rank 2, got " + nn::to_string(t.shape()));
  Signal s(static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
  std::memcpy(s.data(), t.data(), sizeof(double) * t.size());
  return s;
}

}  // namespace srgdiff::io
