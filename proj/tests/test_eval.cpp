// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <vector>

#include "cvda/error.hpp"
#include "cvda/eval.hpp"
#include "cvda/generator.hpp"
#include "cvda/io_util.hpp"
#include "cvda/reference.hpp"
#include "cvda/rng.hpp"
#include "cvda/sync.hpp"

using namespace cvda;

namespace {

TrainConfig tiny_config(uint64_t seed) {
  TrainConfig cfg;
  cfg.K = 3;
  cfg.T = 2, cfg.H = 8, cfg.W = 8, cfg.C = 3;
  cfg.d_model = 8;
  cfg.n_blocks = 2;
  cfg.n_heads = 2;
  cfg.patch_t = 2;
  cfg.patch_hw = 8;
  cfg.d_proj = 4;
  cfg.seed = seed;
  return cfg;
}

GeneratorSpec tiny_spec(int K, int n, uint64_t seed) {
  GeneratorSpec spec = default_generator_spec(K, n, seed);
  spec.T = 2, spec.H = 8, spec.W = 8;
  // Default biases are sized for the default frame; drop them and let the
  // warp parameters keep the tiny views distinct.
  for (auto& v : spec.views) v.view_bias = Mat();
  return spec;
}

EncoderParams random_params(const TrainConfig& cfg, uint64_t stream) {
  EncoderParams p = make_encoder(cfg);
  Rng rng(stream);
  init_encoder(p, rng);
  return p;
}

}  // namespace

TEST_CASE("top-k accuracy closed forms") {
  Mat logits(4, 5);
  logits << 9, 0, 0, 0, 0,
            0, 9, 0, 0, 0,
            0, 0, 9, 0, 0,
            0, 0, 0, 0, 9;
  std::vector<int> labels = {0, 1, 2, 4};
  CHECK(topk_accuracy(logits, labels, 1) == 1.0);
  CHECK(topk_accuracy(logits, labels, 5) == 1.0);

  // k = K always saturates, whatever the logits.
  Mat junk = Mat::Random(6, 4);
  std::vector<int> any = {0, 1, 2, 3, 0, 1};
  CHECK(topk_accuracy(junk, any, 4) == 1.0);

  // Constant logits: ties break to the smallest class index, so top-1 hits
  // exactly the rows whose label is class 0.
  Mat flat = Mat::Zero(5, 5);
  std::vector<int> y = {0, 0, 1, 2, 3};
  CHECK(topk_accuracy(flat, y, 1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(topk_accuracy(flat, y, 5) == 1.0);
}

TEST_CASE("tie ranking favors the smaller class index at every k") {
  Mat logits(1, 4);
  logits << 2.0, 5.0, 5.0, 5.0;
  // Descending with ties by index: classes 1, 2, 3, then 0.
  CHECK(topk_accuracy(logits, {1}, 1) == 1.0);
  CHECK(topk_accuracy(logits, {2}, 1) == 0.0);
  CHECK(topk_accuracy(logits, {2}, 2) == 1.0);
  CHECK(topk_accuracy(logits, {3}, 2) == 0.0);
  CHECK(topk_accuracy(logits, {3}, 3) == 1.0);
  CHECK(topk_accuracy(logits, {0}, 3) == 0.0);
}

TEST_CASE("top-k matches the sort-based oracle on random instances") {
  Rng rng(derive_stream(61, "eval/topk", 0));
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(20));
    const int k_classes = 2 + static_cast<int>(rng.index(6));
    Mat logits(n, k_classes);
    ref::Rows rows(static_cast<size_t>(n));
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k_classes; ++j) {
        // Coarse grid so ties actually occur.
        logits(i, j) = static_cast<double>(rng.index(4));
        rows[static_cast<size_t>(i)].push_back(logits(i, j));
      }
      labels.push_back(static_cast<int>(rng.index(k_classes)));
    }
    const int k = 1 + static_cast<int>(rng.index(k_classes));
    CHECK(topk_accuracy(logits, labels, k) ==
          ref::topk_accuracy(rows, labels, k));
  }
}

TEST_CASE("top-k rejects malformed queries") {
  Mat logits = Mat::Zero(2, 3);
  std::vector<int> labels = {0, 1};
  CHECK_THROWS_WITH_AS(topk_accuracy(logits, labels, 0),
                       doctest::Contains("[1, K]"), Error);
  CHECK_THROWS_WITH_AS(topk_accuracy(logits, labels, 4),
                       doctest::Contains("[1, K]"), Error);
  CHECK_THROWS_WITH_AS(topk_accuracy(logits, {0}, 1),
                       doctest::Contains("disagree"), Error);
  CHECK_THROWS_WITH_AS(topk_accuracy(logits, {0, 5}, 1),
                       doctest::Contains("label"), Error);
}

TEST_CASE("chunked scoring equals one-clip-at-a-time scoring") {
  TrainConfig cfg = tiny_config(11);
  const Corpus corpus = generate_corpus(tiny_spec(cfg.K, 4, 11));
  const EncoderParams p = random_params(cfg, derive_stream(11, "eval/params", 0));

  // Enough rows to cross the internal chunk boundary.
  std::vector<int> records;
  for (size_t i = 0; i < corpus.manifest.records.size(); ++i)
    records.push_back(static_cast<int>(i));
  REQUIRE(records.size() > 32);
  const Mat batched = score_records(p, corpus, records);

  for (size_t i = 0; i < records.size(); ++i) {
    const Vec z = encode(p, corpus.clips[static_cast<size_t>(records[i])]);
    const Vec logits = classify(p, z);
    for (int j = 0; j < cfg.K; ++j)
      CHECK(batched(static_cast<Eigen::Index>(i), j) ==
            doctest::Approx(logits(j)).epsilon(1e-12));
  }
}

TEST_CASE("comparison matrix covers every view and modality cell") {
  TrainConfig cfg = tiny_config(13);
  const Corpus home = generate_corpus(tiny_spec(cfg.K, 5, 13));
  const Corpus foreign = generate_foreign_corpus(tiny_spec(cfg.K, 5, 13), 99);
  const auto groups = build_sync_groups(home.manifest, 1, {2, 3}, 1);
  const auto splits = stratified_split(groups, 0.7, 0.15, 0.15, 13);

  const EncoderParams a = random_params(cfg, derive_stream(13, "eval/a", 0));
  const EncoderParams b = random_params(cfg, derive_stream(13, "eval/b", 0));
  std::vector<std::pair<std::string, const EncoderParams*>> baselines = {
      {"first", &a}, {"second", &b}};

  const EvalMatrix m = evaluate_matrix(baselines, home, splits, &foreign);
  // 4 home source views + home target + foreign source + foreign target,
  // each for two baselines.
  CHECK(m.cells.size() == 14);
  CHECK(m.top_k == 3);
  int foreign_cells = 0, target_cells = 0;
  for (const EvalCell& c : m.cells) {
    CHECK(c.top1 >= 0.0);
    CHECK(c.top5 <= 1.0);
    CHECK(c.top1 <= c.top5);
    CHECK(c.n >= 1);
    if (c.corpus == "foreign") ++foreign_cells;
    if (c.modality == kModTarget) ++target_cells;
  }
  CHECK(foreign_cells == 4);
  CHECK(target_cells == 4);

  // Home cells use the test split only: 5 groups per class split 3/1/1.
  for (const EvalCell& c : m.cells)
    if (c.corpus == "home") CHECK(c.n == cfg.K * 1);

  // Deterministic re-evaluation.
  const EvalMatrix m2 = evaluate_matrix(baselines, home, splits, &foreign);
  REQUIRE(m2.cells.size() == m.cells.size());
  for (size_t i = 0; i < m.cells.size(); ++i) {
    CHECK(m2.cells[i].top1 == m.cells[i].top1);
    CHECK(m2.cells[i].top5 == m.cells[i].top5);
  }

  // Without a foreign corpus only the home cells appear.
  const EvalMatrix home_only = evaluate_matrix(baselines, home, splits, nullptr);
  CHECK(home_only.cells.size() == 10);
}

TEST_CASE("comparison matrix rejects bad inputs") {
  TrainConfig cfg = tiny_config(17);
  const Corpus home = generate_corpus(tiny_spec(cfg.K, 5, 17));
  const auto groups = build_sync_groups(home.manifest, 1, {2, 3}, 1);
  const auto splits = stratified_split(groups, 0.7, 0.15, 0.15, 17);
  const EncoderParams a = random_params(cfg, derive_stream(17, "eval/a", 0));

  // Dimension disagreement across baselines.
  TrainConfig other = cfg;
  other.d_model = 16;
  other.n_heads = 4;
  const EncoderParams b = random_params(other, derive_stream(17, "eval/b", 0));
  CHECK_THROWS_WITH_AS(
      evaluate_matrix({{"a", &a}, {"b", &b}}, home, splits, nullptr),
      doctest::Contains("dims disagree"), Error);

  // A split table that never assigns test rows starves every cell.
  const auto no_test = stratified_split(groups, 0.8, 0.2, 0.0, 17);
  CHECK_THROWS_WITH_AS(evaluate_matrix({{"a", &a}}, home, no_test, nullptr),
                       doctest::Contains("no test rows"), Error);

  // A record whose event key is missing from the table is an error.
  SplitAssignment partial = splits;
  partial.by_group.erase(partial.by_group.begin());
  CHECK_THROWS_WITH_AS(evaluate_matrix({{"a", &a}}, home, partial, nullptr),
                       doctest::Contains("split assignment"), Error);

  CHECK_THROWS_WITH_AS(evaluate_matrix({}, home, splits, nullptr),
                       doctest::Contains("no baselines"), Error);
}

TEST_CASE("table and tsv renderings carry every cell") {
  TrainConfig cfg = tiny_config(19);
  const Corpus home = generate_corpus(tiny_spec(cfg.K, 5, 19));
  const auto groups = build_sync_groups(home.manifest, 1, {2, 3}, 1);
  const auto splits = stratified_split(groups, 0.7, 0.15, 0.15, 19);
  const EncoderParams a = random_params(cfg, derive_stream(19, "eval/a", 0));

  const EvalMatrix m = evaluate_matrix({{"only", &a}}, home, splits, nullptr);
  const std::string table = render_table(m);
  CHECK(table.find("only") != std::string::npos);
  CHECK(table.find("V1/modA") != std::string::npos);
  CHECK(table.find("V4/modA") != std::string::npos);
  CHECK(table.find("V1/modB") != std::string::npos);
  CHECK(table.find("top-1/top-3") != std::string::npos);

  char name[64];
  std::snprintf(name, sizeof name, "cvda_eval_%d", static_cast<int>(getpid()));
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(dir);
  const auto tsv = dir / "cells.tsv";
  write_eval_tsv(m, tsv);
  const std::string text = read_text_file(tsv);
  CHECK(split_lines(text).size() == 1 + m.cells.size());
  CHECK(text.find("baseline\tcorpus\tview") == 0);
  std::filesystem::remove_all(dir);
}
