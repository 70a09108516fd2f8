// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
//
// Prints the inventory of a checkpoint file: format version, meta entries,
// and per-tensor shape plus value statistics. Reads summaries only, so it
// stays cheap even for large files and never allocates parameter storage.

#include <cstdio>
#include <string>

#include "cvda/checkpoint.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: ckpt-inspect <checkpoint>\n");
    return 2;
  }
  try {
    cvda::CheckpointSummary s = cvda::summarize_checkpoint(argv[1]);
    std::printf("%s: format v%u, %lld scalars, %zu tensors\n", argv[1], s.version,
                static_cast<long long>(s.n_scalars), s.tensors.size());
    for (const auto& [key, value] : s.meta)
      std::printf("  meta %-22s %s\n", key.c_str(), value.c_str());
    for (const auto& t : s.tensors) {
      std::string dims;
      for (size_t i = 0; i < t.dims.size(); ++i)
        dims += (i ? "x" : "") + std::to_string(t.dims[i]);
      std::printf("  %-26s %-12s min %+.6e  max %+.6e  l2 %.6e\n", t.name.c_str(),
                  dims.c_str(), t.min, t.max, t.l2);
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ckpt-inspect: error: %s\n", e.what());
    return 1;
  }
}
