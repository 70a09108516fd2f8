// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "cvda/checkpoint.hpp"
#include "cvda/config.hpp"
#include "cvda/error.hpp"
#include "cvda/io_util.hpp"
#include "cvda/rng.hpp"

using namespace cvda;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("ckpt-test-" +
                                                std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool params_bit_identical(EncoderParams& a, EncoderParams& b) {
  auto ra = param_refs(a);
  auto rb = param_refs(b);
  if (ra.size() != rb.size()) return false;
  for (size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].name != rb[i].name || ra[i].size() != rb[i].size()) return false;
    if (std::memcmp(ra[i].data, rb[i].data, sizeof(double) * ra[i].size()) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("save then load reproduces every parameter bit for bit") {
  TempDir tmp;
  TrainConfig cfg;
  cfg.d_model = 16;
  cfg.n_blocks = 2;
  cfg.n_heads = 2;
  cfg.T = 4;
  cfg.H = 16;
  cfg.W = 16;
  cfg.d_proj = 8;
  EncoderParams p = make_encoder(cfg);
  Rng rng(derive_stream(77, "ckpt"));
  init_encoder(p, rng);
  // Awkward values survive too.
  p.cls_token(0) = -0.0;
  p.cls_token(1) = 1e-308;
  p.patch_weight(0, 0) = 0.1 + 0.2;

  fs::path file = tmp.path / "model.ckpt";
  save_checkpoint(file, p, {{"phase", "1"}, {"note", "unit test"}});

  Checkpoint ck = load_checkpoint(file);
  CHECK(params_bit_identical(p, ck.params));
  CHECK(ck.meta.at("phase") == "1");
  CHECK(ck.meta.at("note") == "unit test");
  CHECK(ck.meta.count("d_model") == 0);  // dim keys are container internals

  // Saving the loaded copy is byte-identical to the first file.
  fs::path file2 = tmp.path / "model2.ckpt";
  save_checkpoint(file2, ck.params, ck.meta);
  CHECK(read_binary_file(file) == read_binary_file(file2));
}

TEST_CASE("reserved meta keys are rejected at save time") {
  TempDir tmp;
  TrainConfig cfg;
  EncoderParams p = make_encoder(cfg);
  CHECK_THROWS_AS(save_checkpoint(tmp.path / "x.ckpt", p, {{"d_model", "9"}}), Error);
}

TEST_CASE("corrupt containers are rejected") {
  TempDir tmp;
  TrainConfig cfg;
  cfg.d_model = 8;
  cfg.n_blocks = 1;
  cfg.n_heads = 2;
  cfg.T = 2;
  cfg.H = 8;
  cfg.W = 8;
  cfg.patch_t = 2;
  cfg.patch_hw = 8;
  cfg.d_proj = 4;
  EncoderParams p = make_encoder(cfg);
  fs::path good = tmp.path / "good.ckpt";
  save_checkpoint(good, p);
  std::vector<uint8_t> bytes = read_binary_file(good);

  {
    auto bad = bytes;
    bad[0] = 'X';
    fs::path f = tmp.path / "magic.ckpt";
    write_binary_file(f, bad.data(), bad.size());
    CHECK_THROWS_WITH_AS(load_checkpoint(f), doctest::Contains("magic"), Error);
  }
  {
    auto bad = bytes;
    bad[4] = 99;  // version field
    fs::path f = tmp.path / "version.ckpt";
    write_binary_file(f, bad.data(), bad.size());
    CHECK_THROWS_WITH_AS(load_checkpoint(f), doctest::Contains("version"), Error);
  }
  {
    auto bad = bytes;
    bad.resize(bad.size() / 2);
    fs::path f = tmp.path / "trunc.ckpt";
    write_binary_file(f, bad.data(), bad.size());
    CHECK_THROWS_AS(load_checkpoint(f), Error);
  }
  {
    auto bad = bytes;
    bad.push_back(0);
    fs::path f = tmp.path / "trail.ckpt";
    write_binary_file(f, bad.data(), bad.size());
    CHECK_THROWS_WITH_AS(load_checkpoint(f), doctest::Contains("trailing"), Error);
  }
}

TEST_CASE("summaries expose shapes, dims, and scalar totals") {
  TempDir tmp;
  TrainConfig cfg;
  EncoderParams p = make_encoder(cfg);
  Rng rng(derive_stream(78, "ckpt-summary"));
  init_encoder(p, rng);
  fs::path file = tmp.path / "model.ckpt";
  save_checkpoint(file, p, {{"phase", "2"}});

  CheckpointSummary s = summarize_checkpoint(file);
  CHECK(s.version == 1);
  CHECK(s.meta.at("phase") == "2");
  CHECK(s.meta.at("d_model") == "64");
  CHECK(s.n_scalars == param_count(p));
  CHECK(s.tensors.size() == param_refs(p).size());
  CHECK(s.tensors.front().name == "patch_embed.weight");
  CHECK(s.tensors.front().dims == std::vector<uint64_t>{64, 384});
  bool found_pos = false;
  for (const auto& t : s.tensors)
    if (t.name == "pos_embed") {
      found_pos = true;
      CHECK(t.dims == std::vector<uint64_t>{65, 64});
      CHECK(t.l2 > 0.0);
      CHECK(t.min < t.max);
    }
  CHECK(found_pos);
}
