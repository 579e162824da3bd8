// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "srgdiff/nn/param_store.hpp"

namespace srgdiff::nn {

inline constexpr const char* kCheckpointHeader = "srgdiff-checkpoint 1";

using CheckpointMeta = std::map<std::string, std::string>;

/// Writes one tensor file per parameter plus manifest.txt into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const ParamStore& store,
                     const CheckpointMeta& meta = {});

/// Copies values and frozen flags into an already-constructed store. Every
/// parameter of `store` must be present with a matching shape.
CheckpointMeta load_checkpoint(const std::filesystem::path& dir, ParamStore& store);

/// Reads only the metadata block of a checkpoint manifest.
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

}  // namespace srgdiff::nn
