// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "srgdiff/eeg_data.hpp"
#include "srgdiff/nn/tensor.hpp"

namespace srgdiff::io {

// Layout: "SRGDTNSR" | u32 rank | u32 dims[rank] | f32 payload (row-major).
// Every integer and float is little-endian.
inline constexpr char kTensorMagic[8] = {'S', 'R', 'G', 'D', 'T', 'N', 'S', 'R'};

struct TensorFile {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

std::vector<unsigned char> encode_tensor(std::span<const std::uint32_t> dims,
                                         std::span<const float> data);
TensorFile decode_tensor(std::span<const unsigned char> bytes);

void write_tensor_file(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                       std::span<const float> data);
TensorFile read_tensor_file(const std::filesystem::path& path);

/// Narrows to f32 on write; values already representable round-trip exactly.
void write_tensor(const std::filesystem::path& path, const nn::Tensor& t);
nn::Tensor read_tensor(const std::filesystem::path& path);

nn::Tensor to_tensor(const Signal& s);
Signal to_signal(const nn::Tensor& t);

}  // namespace srgdiff::io
