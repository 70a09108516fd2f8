// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "cvda/error.hpp"
#include "cvda/eval.hpp"
#include "cvda/generator.hpp"
#include "cvda/io_util.hpp"
#include "cvda/rng.hpp"
#include "cvda/sync.hpp"
#include "cvda/trainer.hpp"

using namespace cvda;

namespace {

TrainConfig tiny_config(uint64_t seed) {
  TrainConfig cfg;
  cfg.K = 4;
  cfg.T = 2, cfg.H = 8, cfg.W = 8, cfg.C = 3;
  cfg.d_model = 8;
  cfg.n_blocks = 2;
  cfg.n_heads = 2;
  cfg.patch_t = 2;
  cfg.patch_hw = 8;
  cfg.d_proj = 4;
  cfg.epochs_phase1 = 2;
  cfg.epochs_phase2 = 2;
  cfg.batch_phase1 = 4;
  cfg.batch_phase2 = 6;
  cfg.queue_capacity = 8;
  cfg.seed = seed;
  return cfg;
}

struct Bench {
  Corpus corpus;
  std::vector<SyncGroup> groups;
  SplitAssignment splits;
};

Bench tiny_bench(const TrainConfig& cfg, int n_per_class) {
  GeneratorSpec spec = default_generator_spec(cfg.K, n_per_class, cfg.seed);
  spec.T = cfg.T, spec.H = cfg.H, spec.W = cfg.W;
  // The default per-view bias fields are sized for the default frame; the
  // warp parameters alone keep the tiny views distinct.
  for (auto& v : spec.views) v.view_bias = Mat();
  Bench b;
  b.corpus = generate_corpus(spec);
  b.groups = build_sync_groups(b.corpus.manifest, 1, {2, 3}, 1);
  b.splits = stratified_split(b.groups, 0.7, 0.15, 0.15, cfg.seed);
  return b;
}

bool params_equal(const EncoderParams& a, const EncoderParams& b) {
  auto ra = param_refs(const_cast<EncoderParams&>(a));
  auto rb = param_refs(const_cast<EncoderParams&>(b));
  if (ra.size() != rb.size()) return false;
  for (size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].size() != rb[i].size()) return false;
    for (Eigen::Index j = 0; j < ra[i].size(); ++j)
      if (ra[i].data[j] != rb[i].data[j]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("data assembly routes groups by split and strips target labels") {
  TrainConfig cfg = tiny_config(23);
  Bench b = tiny_bench(cfg, 5);

  const Phase1Data d1 = make_phase1_data(b.corpus, b.groups, b.splits);
  CHECK(d1.train_groups.size() == static_cast<size_t>(cfg.K * 3));
  CHECK(d1.val_records.size() == static_cast<size_t>(cfg.K * 1));

  const Phase2Data d2 = make_phase2_data(b.corpus, b.groups, b.splits);
  CHECK(d2.source_records.size() == d1.train_groups.size());
  CHECK(d2.val_records == d1.val_records);
  // Every target-modality clip participates, and none carries a label.
  CHECK(d2.target_clips.size() == static_cast<size_t>(cfg.K * 5));
  for (const Clip& c : d2.target_clips) {
    CHECK(c.class_id == kNoLabel);
    CHECK(c.modality == kModTarget);
  }

  // A group missing from the split table is a hard error.
  SplitAssignment partial = b.splits;
  partial.by_group.erase(partial.by_group.begin());
  CHECK_THROWS_WITH_AS(make_phase1_data(b.corpus, b.groups, partial),
                       doctest::Contains("split assignment"), Error);
}

TEST_CASE("pretraining is deterministic and tracks its bookkeeping") {
  TrainConfig cfg = tiny_config(29);
  Bench b = tiny_bench(cfg, 4);
  const Phase1Data d1 = make_phase1_data(b.corpus, b.groups, b.splits);

  const PhaseResult r1 = train_phase1(d1, cfg);
  const PhaseResult r2 = train_phase1(d1, cfg);
  CHECK(params_equal(r1.final_params, r2.final_params));
  CHECK(params_equal(r1.best_params, r2.best_params));
  REQUIRE(r1.steps.size() == r2.steps.size());
  for (size_t i = 0; i < r1.steps.size(); ++i) {
    CHECK(r1.steps[i].total == r2.steps[i].total);
    CHECK(r1.steps[i].ce == r2.steps[i].ce);
  }

  // 3 train groups per class, batch 4: ceil(12/4) = 3 steps per epoch.
  CHECK(r1.steps.size() == static_cast<size_t>(3 * cfg.epochs_phase1));
  CHECK(r1.epochs.size() == static_cast<size_t>(cfg.epochs_phase1));
  for (const StepRecord& s : r1.steps) {
    CHECK(s.phase == 1);
    CHECK(std::abs(s.total - (s.ce + cfg.lambda1 * s.aux)) < 1e-9);
    CHECK(s.aux_applied);  // no singletons in the generated corpus
    CHECK(s.pairs == 0);
    CHECK(std::isfinite(s.total));
  }
  CHECK(r1.epochs[0].lr == cfg.lr_phase1);
  CHECK(r1.best_epoch >= 0);
  CHECK(r1.best_val_top1 >= 0.0);
}

TEST_CASE("zero contrastive weight leaves the projector at its initialization") {
  TrainConfig cfg = tiny_config(31);
  cfg.weight_decay = 0.0;  // decay would nudge even unused tensors
  cfg.lambda1 = 0.0;
  Bench b = tiny_bench(cfg, 4);
  const Phase1Data d1 = make_phase1_data(b.corpus, b.groups, b.splits);
  const PhaseResult r = train_phase1(d1, cfg);

  EncoderParams init = make_encoder(cfg);
  {
    Rng rng(derive_stream(cfg.seed, "init"));
    init_encoder(init, rng);
  }
  // The projector's only gradient source is the contrastive term.
  CHECK(r.final_params.proj_w1 == init.proj_w1);
  CHECK(r.final_params.proj_w2 == init.proj_w2);
  CHECK(r.final_params.proj_b1 == init.proj_b1);
  CHECK(r.final_params.proj_b2 == init.proj_b2);
  // While the classifier and encoder trunk moved.
  CHECK(r.final_params.cls_weight != init.cls_weight);
  CHECK(r.final_params.patch_weight != init.patch_weight);

  // And the weighted run moves the projector too.
  TrainConfig on = cfg;
  on.lambda1 = 1.0;
  const PhaseResult r_on = train_phase1(d1, on);
  CHECK(r_on.final_params.proj_w1 != init.proj_w1);
}

TEST_CASE("groups without positives still feed cross-entropy") {
  TrainConfig cfg = tiny_config(37);
  cfg.epochs_phase1 = 1;
  Bench b = tiny_bench(cfg, 4);
  Phase1Data d1 = make_phase1_data(b.corpus, b.groups, b.splits);
  for (SyncGroup& g : d1.train_groups) {
    g.singleton = true;
    g.positive_idx.clear();
  }
  const PhaseResult r = train_phase1(d1, cfg);
  for (const StepRecord& s : r.steps) {
    CHECK_FALSE(s.aux_applied);
    CHECK(s.aux == 0.0);
    CHECK(s.total == s.ce);
  }

  // Mixed batch: one real pair among singletons still applies the term.
  Phase1Data mixed = make_phase1_data(b.corpus, b.groups, b.splits);
  for (size_t i = 1; i < mixed.train_groups.size(); ++i) {
    mixed.train_groups[i].singleton = true;
    mixed.train_groups[i].positive_idx.clear();
  }
  const PhaseResult rm = train_phase1(mixed, cfg);
  bool any_applied = false;
  for (const StepRecord& s : rm.steps) any_applied = any_applied || s.aux_applied;
  CHECK(any_applied);
}

TEST_CASE("adaptation freezes the lower trunk bit-exactly") {
  TrainConfig cfg = tiny_config(41);
  Bench b = tiny_bench(cfg, 4);
  const Phase1Data d1 = make_phase1_data(b.corpus, b.groups, b.splits);
  const Phase2Data d2 = make_phase2_data(b.corpus, b.groups, b.splits);

  const PhaseResult p1 = train_phase1(d1, cfg);
  const PhaseResult p2 = train_phase2(p1.best_params, d2, cfg);

  const FreezeMask mask = make_freeze_mask(cfg.freeze_fraction, cfg.n_blocks);
  auto before = param_refs(const_cast<EncoderParams&>(p1.best_params));
  auto after = param_refs(const_cast<EncoderParams&>(p2.final_params));
  REQUIRE(before.size() == after.size());
  int frozen_seen = 0, moved = 0;
  for (size_t i = 0; i < before.size(); ++i) {
    bool same = true;
    for (Eigen::Index j = 0; j < before[i].size(); ++j)
      same = same && before[i].data[j] == after[i].data[j];
    if (is_frozen(before[i], mask)) {
      CHECK(same);
      ++frozen_seen;
    } else if (!same) {
      ++moved;
    }
  }
  CHECK(frozen_seen > 0);
  CHECK(moved > 0);

  // Pairing bookkeeping: every target row is either confidently labeled or
  // rejected, and pair counts reconcile.
  for (const StepRecord& s : p2.steps) {
    CHECK(s.phase == 2);
    CHECK(s.accepted + s.rejected == cfg.batch_phase2);
    CHECK(s.pairs == s.in_batch + s.from_queue);
    CHECK(s.pairs <= s.accepted * cfg.pairs_per_target);
    CHECK(std::abs(s.total - (s.ce + cfg.alpha * s.aux)) < 1e-9);
  }

  // Determinism of the whole phase.
  const PhaseResult p2b = train_phase2(p1.best_params, d2, cfg);
  CHECK(params_equal(p2.final_params, p2b.final_params));
}

TEST_CASE("zero alignment weight equals a shut confidence gate") {
  TrainConfig cfg = tiny_config(43);
  Bench b = tiny_bench(cfg, 4);
  const Phase1Data d1 = make_phase1_data(b.corpus, b.groups, b.splits);
  const Phase2Data d2 = make_phase2_data(b.corpus, b.groups, b.splits);
  const PhaseResult p1 = train_phase1(d1, cfg);

  TrainConfig zero_alpha = cfg;
  zero_alpha.alpha = 0.0;
  zero_alpha.pseudo_conf_threshold = 0.0;  // accept everything, scale by zero
  TrainConfig shut_gate = cfg;
  shut_gate.pseudo_conf_threshold = 1.0;  // confidence never reaches 1 exactly

  const PhaseResult ra = train_phase2(p1.best_params, d2, zero_alpha);
  const PhaseResult rb = train_phase2(p1.best_params, d2, shut_gate);
  CHECK(params_equal(ra.final_params, rb.final_params));

  bool ra_built_pairs = false;
  for (const StepRecord& s : ra.steps) ra_built_pairs = ra_built_pairs || s.pairs > 0;
  CHECK(ra_built_pairs);
  for (const StepRecord& s : rb.steps) {
    CHECK(s.accepted == 0);
    CHECK(s.pairs == 0);
    CHECK_FALSE(s.aux_applied);
  }
}

TEST_CASE("adaptation rejects mismatched checkpoints and empty pools") {
  TrainConfig cfg = tiny_config(47);
  Bench b = tiny_bench(cfg, 4);
  const Phase2Data d2 = make_phase2_data(b.corpus, b.groups, b.splits);

  TrainConfig other = cfg;
  other.d_model = 16;
  other.n_heads = 4;
  EncoderParams wrong = make_encoder(other);
  CHECK_THROWS_WITH_AS(train_phase2(wrong, d2, cfg),
                       doctest::Contains("dims disagree"), Error);

  EncoderParams right = make_encoder(cfg);
  Phase2Data empty_source = d2;
  empty_source.source_records.clear();
  CHECK_THROWS_WITH_AS(train_phase2(right, empty_source, cfg),
                       doctest::Contains("source pool"), Error);
  Phase2Data empty_target = d2;
  empty_target.target_clips.clear();
  CHECK_THROWS_WITH_AS(train_phase2(right, empty_target, cfg),
                       doctest::Contains("target pool"), Error);

  Phase1Data no_groups;
  no_groups.corpus = &b.corpus;
  CHECK_THROWS_WITH_AS(train_phase1(no_groups, cfg),
                       doctest::Contains("sync-group pool"), Error);
}

TEST_CASE("baseline kinds compose exactly from the two phases") {
  TrainConfig cfg = tiny_config(53);
  cfg.epochs_phase1 = 1;
  cfg.epochs_phase2 = 1;
  Bench b = tiny_bench(cfg, 4);

  const auto all = run_all_baselines(b.corpus, b.groups, b.splits, cfg);
  REQUIRE(all.size() == 4);
  CHECK(all[0].kind == BaselineKind::finetune_only);
  CHECK(all[1].kind == BaselineKind::finetune_contrastive);
  CHECK(all[2].kind == BaselineKind::uda_only);
  CHECK(all[3].kind == BaselineKind::full_method);

  // The shared runner and the one-kind runner agree checkpoint for
  // checkpoint, and the plain pretraining is shared between rows.
  for (const BaselineRun& shared : all) {
    const BaselineRun solo =
        run_baseline(shared.kind, b.corpus, b.groups, b.splits, cfg);
    CHECK(params_equal(shared.final_params, solo.final_params));
  }
  CHECK(params_equal(all[0].phase1.final_params, all[2].phase1.final_params));
  CHECK(params_equal(all[1].phase1.final_params, all[3].phase1.final_params));
  CHECK_FALSE(params_equal(all[0].final_params, all[1].final_params));
  CHECK(all[2].phase2.has_value());
  CHECK(all[3].phase2.has_value());

  // Composition identity for the full method.
  const Phase1Data d1 = make_phase1_data(b.corpus, b.groups, b.splits);
  const Phase2Data d2 = make_phase2_data(b.corpus, b.groups, b.splits);
  const PhaseResult p1 = train_phase1(d1, cfg);
  const PhaseResult p2 = train_phase2(p1.best_params, d2, cfg);
  CHECK(params_equal(all[3].final_params, p2.final_params));

  CHECK(baseline_name(BaselineKind::uda_only) == "uda_only");
  CHECK(parse_baseline_kind("full_method") == BaselineKind::full_method);
  CHECK_THROWS_WITH_AS(parse_baseline_kind("lunch"),
                       doctest::Contains("unknown baseline"), Error);
}

TEST_CASE("metrics files are deterministic and complete") {
  TrainConfig cfg = tiny_config(59);
  cfg.epochs_phase1 = 1;
  Bench b = tiny_bench(cfg, 4);
  const Phase1Data d1 = make_phase1_data(b.corpus, b.groups, b.splits);
  const PhaseResult r = train_phase1(d1, cfg);

  char name[64];
  std::snprintf(name, sizeof name, "cvda_trainer_%d", static_cast<int>(getpid()));
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(dir);

  write_step_metrics(dir / "steps.tsv", r.steps);
  write_epoch_metrics(dir / "epochs.tsv", r.epochs);
  const std::string steps1 = read_text_file(dir / "steps.tsv");
  write_step_metrics(dir / "steps.tsv", r.steps);
  CHECK(read_text_file(dir / "steps.tsv") == steps1);

  CHECK(split_lines(steps1).size() == 1 + r.steps.size());
  CHECK(steps1.find("phase\tstep\tepoch\tlr\tce\taux\ttotal") == 0);
  const std::string epochs = read_text_file(dir / "epochs.tsv");
  CHECK(split_lines(epochs).size() == 1 + r.epochs.size());
  std::filesystem::remove_all(dir);
}
