// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cvda/types.hpp"

namespace cvda {

// Dataset index: every rendered clip has one row. The text format is a
// single header line followed by tab-separated records
//   clip_ref <TAB> view <TAB> modality <TAB> class <TAB> start <TAB> end
// where class is the class name or '-' when the row carries no label.
// clip_ref paths are relative to the manifest's directory.
struct Manifest {
  int schema_version = 1;
  std::vector<std::string> class_names;
  int n_views = 4;
  std::vector<SampleRecord> records;

  int K() const { return static_cast<int>(class_names.size()); }
};

Manifest load_manifest(const std::filesystem::path& p);
void save_manifest(const Manifest& m, const std::filesystem::path& p);

// The unlabeled-adaptation loading path: identical to load_manifest except
// that every record's label is erased before anything else can see it.
// Training code must obtain target-modality records only through this door.
Manifest load_manifest_unlabeled(const std::filesystem::path& p);

// Raw clip payload files: little-endian 32-bit reals, row-major T,H,W,C.
void save_clip_payload(const Clip& clip, const std::filesystem::path& p);

// Reads the payload for `rec` and stamps the record's identity onto the
// returned Clip. Dims are the caller's expectation; the file size must agree.
Clip load_clip(const std::filesystem::path& manifest_dir, const SampleRecord& rec,
               int T, int H, int W, int C);

// Event key shared by all renderings of one logical event. Two records map
// to the same key iff they share class and exact time window.
std::string group_key(int class_id, int64_t start_frame, int64_t end_frame);

}  // namespace cvda
