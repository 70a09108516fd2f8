// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "cvda/encoder.hpp"

namespace cvda {

// Versioned binary container for a full parameter set, all little-endian:
//
//   magic "CVCK" | u32 version=1
//   u32 n_meta   | per entry: u32 key_len, key, u32 val_len, val
//   u32 n_tensors| per tensor: u32 name_len, name, u32 ndim, ndim x u64 dims,
//                  row-major f64 payload
//
// Model dimensions are stored as reserved meta keys (d_model, n_blocks, ...)
// so a checkpoint is self-describing; load allocates from them and then
// demands exactly the registry's tensors with matching shapes.
// load(save(p)) round-trips every parameter bit-identically.

struct Checkpoint {
  EncoderParams params;
  std::map<std::string, std::string> meta;  // user meta, dims stripped
};

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& p,
                     const std::map<std::string, std::string>& meta = {});

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Tensor inventory of a checkpoint without materializing parameters, for
// the inspection tool: (name, dims, min, max, l2 norm) per tensor.
struct TensorSummary {
  std::string name;
  std::vector<uint64_t> dims;
  double min = 0.0, max = 0.0, l2 = 0.0;
};
struct CheckpointSummary {
  uint32_t version = 0;
  std::map<std::string, std::string> meta;  // includes the dim keys
  std::vector<TensorSummary> tensors;
  int64_t n_scalars = 0;
};
CheckpointSummary summarize_checkpoint(const std::filesystem::path& path);

}  // namespace cvda
