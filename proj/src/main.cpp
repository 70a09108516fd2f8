// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
//
// cvda: one executable for the whole pipeline. Data generation, cross-view
// synchronization, the two training phases, the four comparison baselines,
// evaluation, and the self-verification suites (gradient and oracle audits)
// are subcommands so that every artifact on disk can be traced to a single
// command line with a single seed.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cvda/checkpoint.hpp"
#include "cvda/config.hpp"
#include "cvda/error.hpp"
#include "cvda/eval.hpp"
#include "cvda/generator.hpp"
#include "cvda/gradcheck.hpp"
#include "cvda/io_util.hpp"
#include "cvda/losses.hpp"
#include "cvda/manifest.hpp"
#include "cvda/pairing.hpp"
#include "cvda/reference.hpp"
#include "cvda/rng.hpp"
#include "cvda/sync.hpp"
#include "cvda/trainer.hpp"

namespace fs = std::filesystem;

namespace cvda {
namespace {

constexpr const char* kUsage = R"(usage: cvda <command> [flags]

commands:
  gen-data      --out DIR [--spec FILE] [--seed N]
                render the benchmark corpus (spec + manifest + clip payloads);
                --seed overrides the spec's corpus seed
  gen-foreign   --out DIR [--spec FILE] [--seed N]
                render the distribution-shifted foreign corpus from the same
                spec; --seed is the shift seed (default 1)
  sync          --data DIR --out FILE
                build cross-view groups (anchor V1, positives V2..V(n-1),
                the last view held out) and write the group list
  split         --data DIR --out FILE [--seed N]
                stratified 70/15/15 split over event group ids
  train-phase1  --data DIR --out DIR [--config FILE] [--seed N]
                view-invariant pretraining (cross-entropy + contrastive)
  train-phase2  --data DIR --checkpoint FILE --out DIR [--config FILE] [--seed N]
                cross-modal adaptation starting from a phase-1 checkpoint
  baseline      --data DIR --kind NAME --out DIR [--config FILE] [--seed N]
                [--foreign DIR]
                train one baseline; --kind all trains all four and runs the
                evaluation, writing the comparison table
  evaluate      --data DIR --checkpoint PATH --out DIR [--config FILE]
                [--seed N] [--foreign DIR]
                score a checkpoint file, or a directory of <kind>.ckpt files,
                over every view/modality cell (pass the training seed/config
                so the test split matches)
  gradcheck     [--seed N]
                finite-difference audit of the loss and encoder gradients
  oracle-check  [--seed N]
                loop-oracle equivalence audit (losses, ranking, pseudo-labels,
                synchronization, splits)

flags:
  --config FILE      training config as key = value lines; defaults if omitted
  --spec FILE        generator spec as key = value lines; defaults if omitted
  --seed N           master seed; every stage derives named substreams from it
  --out PATH         output directory (or file for sync/split)
  --checkpoint PATH  encoder checkpoint to start from or to evaluate
  --kind NAME        finetune_only | finetune_contrastive | uda_only |
                     full_method | all
  --data DIR         corpus directory written by gen-data
  --foreign DIR      foreign corpus directory written by gen-foreign
)";

// Command-line mistakes get usage text and exit code 2; everything else
// that throws (bad configs, missing files, malformed data) is a runtime
// error with exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Args {
  std::string command;
  std::optional<std::string> config, spec, out, checkpoint, kind, data, foreign;
  std::optional<uint64_t> seed;
};

Args parse_args(int argc, char** argv) {
  if (argc < 2) throw UsageError("missing command");
  Args a;
  a.command = argv[1];

  auto grab = [&](int& i, const char* flag) -> std::string {
    if (i + 1 >= argc)
      throw UsageError(std::string(flag) + " needs a value");
    return argv[++i];
  };

  for (int i = 2; i < argc; ++i) {
    std::string f = argv[i];
    if (f == "--config")
      a.config = grab(i, "--config");
    else if (f == "--spec")
      a.spec = grab(i, "--spec");
    else if (f == "--out")
      a.out = grab(i, "--out");
    else if (f == "--checkpoint")
      a.checkpoint = grab(i, "--checkpoint");
    else if (f == "--kind")
      a.kind = grab(i, "--kind");
    else if (f == "--data")
      a.data = grab(i, "--data");
    else if (f == "--foreign")
      a.foreign = grab(i, "--foreign");
    else if (f == "--seed")
      a.seed = static_cast<uint64_t>(parse_int(grab(i, "--seed"), "--seed"));
    else
      throw UsageError("unknown flag '" + f + "'");
  }
  return a;
}

std::string need(const std::optional<std::string>& v, const char* flag) {
  if (!v) throw UsageError(std::string("this command requires ") + flag);
  return *v;
}

// ---------------------------------------------------------------------------
// Shared loading helpers.

TrainConfig load_cfg(const Args& a) {
  TrainConfig cfg = a.config ? load_train_config(*a.config) : TrainConfig{};
  if (a.seed) cfg.seed = *a.seed;
  require_valid(cfg);
  return cfg;
}

GeneratorSpec load_spec(const Args& a) {
  return a.spec ? load_generator_spec(*a.spec) : default_generator_spec(8, 48, 1);
}

std::vector<int> positive_views(int n_views) {
  std::vector<int> v;
  for (int i = 2; i < n_views; ++i) v.push_back(i);
  return v;
}

struct TrainSetup {
  GeneratorSpec spec;
  Corpus corpus;
  std::vector<SyncGroup> groups;
  SplitAssignment splits;
};

// Loads a corpus directory with groups and splits rebuilt the way every
// training command does it: anchor view 1, positives up to the second-last
// view, the "split" substream of the master seed. Training commands read
// target rows through the label-stripping path; evaluation keeps labels.
TrainSetup load_setup(const fs::path& data, const TrainConfig& cfg,
                      bool unlabeled_targets) {
  TrainSetup s;
  s.spec = load_generator_spec(data / "spec.txt");
  check(s.spec.T == cfg.T && s.spec.H == cfg.H && s.spec.W == cfg.W &&
            s.spec.C == cfg.C,
        "config clip dims (T,H,W,C) disagree with the corpus spec");
  s.corpus = load_corpus(data, unlabeled_targets);
  check(s.corpus.manifest.K() == cfg.K,
        "config K disagrees with the corpus class count");
  s.groups = build_sync_groups(s.corpus.manifest, 1,
                               positive_views(s.corpus.manifest.n_views), 1);
  s.splits = stratified_split(s.groups, 0.7, 0.15, 0.15,
                              derive_stream(cfg.seed, "split"));
  return s;
}

std::map<std::string, std::string> phase_meta(const TrainConfig& cfg,
                                              const PhaseResult& r,
                                              const std::string& phase) {
  return {{"phase", phase},
          {"seed", std::to_string(cfg.seed)},
          {"best_epoch", std::to_string(r.best_epoch)},
          {"best_val_top1", fmt_double(r.best_val_top1)}};
}

// ---------------------------------------------------------------------------
// Data commands.

int cmd_gen_data(const Args& a) {
  GeneratorSpec spec = load_spec(a);
  if (a.seed) spec.seed = *a.seed;
  require_valid(spec);
  fs::path out = need(a.out, "--out");

  Corpus corpus = generate_corpus(spec);
  fs::create_directories(out);
  DirLock lock(out);
  save_corpus(corpus, spec, out);
  std::printf("gen-data: %d classes x %d events -> %zu records in %s\n", spec.K,
              spec.n_clips_per_class, corpus.manifest.records.size(),
              out.string().c_str());
  return 0;
}

int cmd_gen_foreign(const Args& a) {
  GeneratorSpec spec = load_spec(a);
  require_valid(spec);
  uint64_t shift_seed = a.seed.value_or(1);
  fs::path out = need(a.out, "--out");

  Corpus corpus = generate_foreign_corpus(spec, shift_seed);
  fs::create_directories(out);
  DirLock lock(out);
  save_corpus(corpus, spec, out);
  std::printf("gen-foreign: shift seed %" PRIu64 ", magnitude %s -> %zu records in %s\n",
              shift_seed, fmt_double(spec.shift_magnitude).c_str(),
              corpus.manifest.records.size(), out.string().c_str());
  return 0;
}

int cmd_sync(const Args& a) {
  fs::path data = need(a.data, "--data");
  fs::path out = need(a.out, "--out");
  Manifest m = load_manifest(data / "manifest.tsv");
  auto groups = build_sync_groups(m, 1, positive_views(m.n_views), 1);
  int singletons = 0;
  for (const auto& g : groups)
    if (g.singleton) ++singletons;
  save_sync_groups(out, groups);
  std::printf("sync: %zu groups (%d singleton) -> %s\n", groups.size(), singletons,
              out.string().c_str());
  return 0;
}

int cmd_split(const Args& a) {
  fs::path data = need(a.data, "--data");
  fs::path out = need(a.out, "--out");
  uint64_t seed = a.seed.value_or(TrainConfig{}.seed);
  Manifest m = load_manifest(data / "manifest.tsv");
  auto groups = build_sync_groups(m, 1, positive_views(m.n_views), 1);
  auto split = stratified_split(groups, 0.7, 0.15, 0.15, derive_stream(seed, "split"));
  auto bad = validate_split_assignment(split, groups);
  if (!bad.empty()) throw Error("split failed its own invariants: " + bad.front());
  save_split(out, split);
  std::printf("split: %zu group ids over %zu groups -> %s\n", split.by_group.size(),
              groups.size(), out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Training commands.

void write_phase_artifacts(const fs::path& out, const std::string& stem,
                           const PhaseResult& r) {
  write_step_metrics(out / (stem + "_steps.tsv"), r.steps);
  write_epoch_metrics(out / (stem + "_epochs.tsv"), r.epochs);
}

int cmd_train_phase1(const Args& a) {
  TrainConfig cfg = load_cfg(a);
  fs::path out = need(a.out, "--out");
  TrainSetup s = load_setup(need(a.data, "--data"), cfg, /*unlabeled_targets=*/true);

  Phase1Data data = make_phase1_data(s.corpus, s.groups, s.splits);
  PhaseResult r = train_phase1(data, cfg);

  fs::create_directories(out);
  DirLock lock(out);
  save_train_config(cfg, out / "config.txt");
  save_checkpoint(out / "phase1_best.ckpt", r.best_params, phase_meta(cfg, r, "1"));
  save_checkpoint(out / "phase1_final.ckpt", r.final_params, phase_meta(cfg, r, "1"));
  write_phase_artifacts(out, "phase1", r);
  std::printf("train-phase1: %d epochs, best val top-1 %s at epoch %d -> %s\n",
              cfg.epochs_phase1, fmt_double(r.best_val_top1).c_str(), r.best_epoch,
              out.string().c_str());
  return 0;
}

int cmd_train_phase2(const Args& a) {
  TrainConfig cfg = load_cfg(a);
  fs::path out = need(a.out, "--out");
  fs::path ckpt = need(a.checkpoint, "--checkpoint");
  TrainSetup s = load_setup(need(a.data, "--data"), cfg, /*unlabeled_targets=*/true);

  Checkpoint start = load_checkpoint(ckpt);
  Phase2Data data = make_phase2_data(s.corpus, s.groups, s.splits);
  PhaseResult r = train_phase2(start.params, data, cfg);

  fs::create_directories(out);
  DirLock lock(out);
  save_train_config(cfg, out / "config.txt");
  // The adaptation deliverable is the final epoch; the best source-val
  // epoch is recorded in the meta for reporting but not exported, since
  // source-side validation cannot rank adaptation quality.
  save_checkpoint(out / "phase2_final.ckpt", r.final_params, phase_meta(cfg, r, "2"));
  write_phase_artifacts(out, "phase2", r);
  std::printf("train-phase2: %d epochs from %s -> %s\n", cfg.epochs_phase2,
              ckpt.string().c_str(), out.string().c_str());
  return 0;
}

void write_baseline_artifacts(const fs::path& out, const TrainConfig& cfg,
                              const BaselineRun& run) {
  std::string name = baseline_name(run.kind);
  std::map<std::string, std::string> meta = {
      {"baseline", name},
      {"seed", std::to_string(cfg.seed)},
      {"phase", run.phase2 ? "2" : "1"},
      {"phase1_best_epoch", std::to_string(run.phase1.best_epoch)},
      {"phase1_best_val_top1", fmt_double(run.phase1.best_val_top1)}};
  if (run.phase2) {
    meta["phase2_best_epoch"] = std::to_string(run.phase2->best_epoch);
    meta["phase2_best_val_top1"] = fmt_double(run.phase2->best_val_top1);
  }
  save_checkpoint(out / (name + ".ckpt"), run.final_params, meta);
  write_phase_artifacts(out, name + "_phase1", run.phase1);
  if (run.phase2) write_phase_artifacts(out, name + "_phase2", *run.phase2);
}

EvalMatrix evaluate_runs(const std::vector<BaselineRun>& runs, const Corpus& home,
                         const SplitAssignment& splits, const Corpus* foreign) {
  std::vector<std::pair<std::string, const EncoderParams*>> named;
  for (const auto& run : runs)
    named.emplace_back(baseline_name(run.kind), &run.final_params);
  return evaluate_matrix(named, home, splits, foreign);
}

int cmd_baseline(const Args& a) {
  TrainConfig cfg = load_cfg(a);
  fs::path out = need(a.out, "--out");
  fs::path data = need(a.data, "--data");
  std::string kind = need(a.kind, "--kind");
  if (kind != "all") parse_baseline_kind(kind);  // validate before any work

  TrainSetup s = load_setup(data, cfg, /*unlabeled_targets=*/true);
  fs::create_directories(out);
  DirLock lock(out);
  save_train_config(cfg, out / "config.txt");

  if (kind != "all") {
    BaselineRun run = run_baseline(parse_baseline_kind(kind), s.corpus, s.groups,
                                   s.splits, cfg);
    write_baseline_artifacts(out, cfg, run);
    std::printf("baseline %s: done -> %s\n", kind.c_str(), out.string().c_str());
    return 0;
  }

  std::vector<BaselineRun> runs = run_all_baselines(s.corpus, s.groups, s.splits, cfg);
  for (const auto& run : runs) write_baseline_artifacts(out, cfg, run);

  // Evaluation wants the labels back (the target-modality accuracy cells
  // need ground truth), so reload the corpus through the labeled path.
  s.corpus = Corpus{};
  Corpus home = load_corpus(data, /*unlabeled_targets=*/false);
  Corpus foreign;
  if (a.foreign) foreign = load_corpus(*a.foreign, /*unlabeled_targets=*/false);
  EvalMatrix m = evaluate_runs(runs, home, s.splits, a.foreign ? &foreign : nullptr);

  std::string table = render_table(m);
  write_eval_tsv(m, out / "eval_cells.tsv");
  write_text_file(out / "eval_table.txt", table);
  std::fputs(table.c_str(), stdout);
  std::printf("baseline all: four runs + evaluation -> %s\n", out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Evaluation command.

int cmd_evaluate(const Args& a) {
  TrainConfig cfg = load_cfg(a);
  fs::path out = need(a.out, "--out");
  fs::path data = need(a.data, "--data");
  fs::path ckpt = need(a.checkpoint, "--checkpoint");

  TrainSetup s = load_setup(data, cfg, /*unlabeled_targets=*/false);

  // A directory holds the canonical per-baseline files; a single file is
  // labeled by its recorded baseline name (or its stem as a fallback).
  std::vector<std::pair<std::string, Checkpoint>> loaded;
  if (fs::is_directory(ckpt)) {
    for (BaselineKind k :
         {BaselineKind::finetune_only, BaselineKind::finetune_contrastive,
          BaselineKind::uda_only, BaselineKind::full_method}) {
      fs::path p = ckpt / (baseline_name(k) + ".ckpt");
      if (fs::exists(p)) loaded.emplace_back(baseline_name(k), load_checkpoint(p));
    }
    check(!loaded.empty(),
          "no <kind>.ckpt files found in " + ckpt.string());
  } else {
    Checkpoint c = load_checkpoint(ckpt);
    auto it = c.meta.find("baseline");
    std::string name = it != c.meta.end() ? it->second : ckpt.stem().string();
    loaded.emplace_back(name, std::move(c));
  }

  Corpus foreign;
  if (a.foreign) foreign = load_corpus(*a.foreign, /*unlabeled_targets=*/false);

  std::vector<std::pair<std::string, const EncoderParams*>> named;
  for (const auto& [name, c] : loaded) named.emplace_back(name, &c.params);
  EvalMatrix m =
      evaluate_matrix(named, s.corpus, s.splits, a.foreign ? &foreign : nullptr);

  fs::create_directories(out);
  DirLock lock(out);
  std::string table = render_table(m);
  write_eval_tsv(m, out / "eval_cells.tsv");
  write_text_file(out / "eval_table.txt", table);
  std::fputs(table.c_str(), stdout);
  std::printf("evaluate: %zu checkpoints -> %s\n", loaded.size(), out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Verification commands.

int print_fd_reports(const std::vector<FdReport>& reports) {
  int failures = 0;
  for (const auto& r : reports) {
    bool ok = r.pass();
    if (!ok) ++failures;
    std::printf("[%s] %-34s max_rel %.3e (tol %.0e)  tiny_abs %.3e  coords %d\n",
                ok ? " ok " : "FAIL", r.name.c_str(), r.max_rel, r.rel_tol,
                r.max_abs_tiny, r.n_coords);
  }
  return failures;
}

int cmd_gradcheck(const Args& a) {
  uint64_t seed = a.seed.value_or(1);
  int failures = 0;
  failures += print_fd_reports(loss_gradchecks(seed, 20, 1e-4));
  failures += print_fd_reports(encoder_gradchecks(seed, 20, 1e-3));
  if (failures) {
    std::printf("gradcheck: %d FAILURES\n", failures);
    return 1;
  }
  std::printf("gradcheck: all gradients match finite differences\n");
  return 0;
}

ref::Rows to_rows(const Mat& m) {
  ref::Rows r(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

// One random manifest in the shape the synchronization oracle expects:
// 4 views, a sprinkling of target-modality rows, duplicate windows now and
// then to exercise the tie-break rules.
Manifest random_manifest(Rng& rng, int max_records) {
  Manifest m;
  int n_classes = 2 + static_cast<int>(rng.index(3));
  for (int k = 0; k < n_classes; ++k) m.class_names.push_back("c" + std::to_string(k));
  m.n_views = 4;
  int n = 1 + static_cast<int>(rng.index(max_records));
  for (int i = 0; i < n; ++i) {
    SampleRecord r;
    r.clip_ref = "r" + std::to_string(i) + ".bin";
    r.view = 1 + static_cast<int>(rng.index(4));
    r.modality = rng.index(8) == 0 ? kModTarget : kModSource;
    r.class_id = static_cast<int>(rng.index(n_classes));
    r.start_frame = static_cast<int64_t>(rng.index(48));
    r.end_frame = r.start_frame + 1 + static_cast<int64_t>(rng.index(24));
    m.records.push_back(r);
    if (rng.index(5) == 0 && i + 1 < n) {
      ++i;
      SampleRecord dup = m.records.back();
      dup.clip_ref = "r" + std::to_string(i) + ".bin";
      m.records.push_back(dup);
    }
  }
  return m;
}

// A manifest guaranteed to give every class enough distinct events for a
// stratified split (distinct windows, all training views present).
Manifest split_manifest(Rng& rng) {
  Manifest m;
  int n_classes = 2 + static_cast<int>(rng.index(3));
  for (int k = 0; k < n_classes; ++k) m.class_names.push_back("c" + std::to_string(k));
  m.n_views = 4;
  int idx = 0;
  for (int k = 0; k < n_classes; ++k) {
    int events = 4 + static_cast<int>(rng.index(8));
    for (int e = 0; e < events; ++e) {
      int64_t start = 40 * e;
      for (int view = 1; view <= 3; ++view) {
        SampleRecord r;
        r.clip_ref = "s" + std::to_string(idx++) + ".bin";
        r.view = view;
        r.modality = kModSource;
        r.class_id = k;
        r.start_frame = start;
        r.end_frame = start + 16;
        m.records.push_back(r);
      }
    }
  }
  return m;
}

bool sync_groups_match(const std::vector<SyncGroup>& a,
                       const std::vector<SyncGroup>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].anchor_idx != b[i].anchor_idx || a[i].positive_idx != b[i].positive_idx ||
        a[i].class_id != b[i].class_id || a[i].overlap_start != b[i].overlap_start ||
        a[i].overlap_end != b[i].overlap_end || a[i].singleton != b[i].singleton ||
        a[i].group_id != b[i].group_id)
      return false;
  return true;
}

int cmd_oracle_check(const Args& a) {
  uint64_t seed = a.seed.value_or(1);
  int failures = 0;
  auto report = [&](bool ok, const std::string& line) {
    if (!ok) ++failures;
    std::printf("[%s] %s\n", ok ? " ok " : "FAIL", line.c_str());
  };

  {  // Cross-entropy against the scalar-loop oracle.
    Rng rng(derive_stream(seed, "oracle/ce"));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      int B = 1 + static_cast<int>(rng.index(8));
      int K = 2 + static_cast<int>(rng.index(5));
      Mat logits(B, K);
      std::vector<int> labels(B);
      for (int i = 0; i < B; ++i) {
        labels[i] = static_cast<int>(rng.index(K));
        for (int j = 0; j < K; ++j) logits(i, j) = rng.uniform(-4.0, 4.0);
      }
      worst = std::max(worst, std::fabs(cross_entropy(logits, labels).value -
                                        ref::cross_entropy(to_rows(logits), labels)));
    }
    report(worst <= 1e-9, "cross_entropy matches the loop oracle on 100 instances "
                          "(max diff " + fmt_double(worst) + ")");
  }

  {  // Contrastive loss on duplicated labels so positives always exist.
    Rng rng(derive_stream(seed, "oracle/supcon"));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      int half = 1 + static_cast<int>(rng.index(4));
      int d = 2 + static_cast<int>(rng.index(7));
      Mat raw(2 * half, d);
      for (int i = 0; i < raw.rows(); ++i)
        for (int j = 0; j < d; ++j) raw(i, j) = rng.uniform(-2.0, 2.0);
      Mat z = l2_normalize_rows(raw);
      std::vector<int> labels(2 * half);
      for (int i = 0; i < half; ++i)
        labels[i] = labels[half + i] = static_cast<int>(rng.index(3));
      double tau = 0.05 + rng.uniform(0.0, 0.5);
      worst = std::max(worst, std::fabs(supcon_loss(z, labels, tau).value -
                                        ref::supcon(to_rows(z), labels, tau)));
    }
    report(worst <= 1e-9, "contrastive loss matches the loop oracle on 100 "
                          "instances (max diff " + fmt_double(worst) + ")");
  }

  {  // Alignment loss.
    Rng rng(derive_stream(seed, "oracle/ib"));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      int N = 2 + static_cast<int>(rng.index(7));
      int d = 1 + static_cast<int>(rng.index(8));
      Mat s(N, d), t(N, d);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < d; ++j) {
          s(i, j) = rng.uniform(-2.0, 2.0);
          t(i, j) = rng.uniform(-2.0, 2.0);
        }
      double lambda = rng.uniform(0.0, 0.1);
      worst = std::max(worst, std::fabs(ib_loss(s, t, lambda).value -
                                        ref::ib(to_rows(s), to_rows(t), lambda)));
    }
    report(worst <= 1e-9, "alignment loss matches the loop oracle on 100 instances "
                          "(max diff " + fmt_double(worst) + ")");
  }

  {  // Top-k ranking on a coarse grid so ties actually happen.
    Rng rng(derive_stream(seed, "oracle/topk"));
    bool all = true;
    for (int trial = 0; trial < 100 && all; ++trial) {
      int B = 1 + static_cast<int>(rng.index(8));
      int K = 2 + static_cast<int>(rng.index(5));
      Mat logits(B, K);
      std::vector<int> labels(B);
      for (int i = 0; i < B; ++i) {
        labels[i] = static_cast<int>(rng.index(K));
        for (int j = 0; j < K; ++j) logits(i, j) = 0.5 * static_cast<double>(rng.index(4));
      }
      int k = 1 + static_cast<int>(rng.index(K));
      all = topk_accuracy(logits, labels, k) ==
            ref::topk_accuracy(to_rows(logits), labels, k);
    }
    report(all, "top-k accuracy matches the loop oracle exactly on 100 instances");
  }

  {  // Pseudo-label selection.
    Rng rng(derive_stream(seed, "oracle/pseudo"));
    bool all = true;
    for (int trial = 0; trial < 50 && all; ++trial) {
      int B = 1 + static_cast<int>(rng.index(8));
      int K = 2 + static_cast<int>(rng.index(5));
      Mat logits(B, K);
      for (int i = 0; i < B; ++i)
        for (int j = 0; j < K; ++j) logits(i, j) = rng.uniform(-3.0, 3.0);
      double thr = rng.uniform(0.0, 1.0);
      auto got = pseudo_label(logits, thr);
      auto want = ref::pseudo_labels(to_rows(logits), thr);
      all = got.accepted.size() == want.size();
      for (size_t i = 0; all && i < want.size(); ++i)
        all = got.accepted[i].row == want[i].row &&
              got.accepted[i].class_id == want[i].class_id &&
              got.accepted[i].confidence == want[i].confidence;
    }
    report(all, "pseudo-label selection matches the loop oracle on 50 instances");
  }

  {  // Synchronization against the quadratic aligner.
    Rng rng(derive_stream(seed, "oracle/sync"));
    bool all = true;
    for (int trial = 0; trial < 50 && all; ++trial) {
      Manifest m = random_manifest(rng, 200);
      all = sync_groups_match(build_sync_groups(m, 1, {2, 3}, 1),
                              ref::brute_force_sync_groups(m, 1));
    }
    report(all, "synchronization matches the quadratic oracle on 50 manifests");
  }

  {  // Split invariants on manifests with enough events per class.
    Rng rng(derive_stream(seed, "oracle/split"));
    bool all = true;
    for (int trial = 0; trial < 20 && all; ++trial) {
      Manifest m = split_manifest(rng);
      auto groups = build_sync_groups(m, 1, {2, 3}, 1);
      auto split = stratified_split(groups, 0.7, 0.15, 0.15, rng.next_u64());
      all = validate_split_assignment(split, groups).empty();
    }
    report(all, "stratified splits pass the leakage and fraction audit on 20 "
                "manifests");
  }

  if (failures) {
    std::printf("oracle-check: %d FAILURES\n", failures);
    return 1;
  }
  std::printf("oracle-check: production code matches the reference oracles\n");
  return 0;
}

int dispatch(const Args& a) {
  if (a.command == "gen-data") return cmd_gen_data(a);
  if (a.command == "gen-foreign") return cmd_gen_foreign(a);
  if (a.command == "sync") return cmd_sync(a);
  if (a.command == "split") return cmd_split(a);
  if (a.command == "train-phase1") return cmd_train_phase1(a);
  if (a.command == "train-phase2") return cmd_train_phase2(a);
  if (a.command == "baseline") return cmd_baseline(a);
  if (a.command == "evaluate") return cmd_evaluate(a);
  if (a.command == "gradcheck") return cmd_gradcheck(a);
  if (a.command == "oracle-check") return cmd_oracle_check(a);
  if (a.command == "--help" || a.command == "-h" || a.command == "help") {
    std::fputs(kUsage, stdout);
    return 0;
  }
  throw UsageError("unknown command '" + a.command + "'");
}

}  // namespace
}  // namespace cvda

int main(int argc, char** argv) {
  try {
    return cvda::dispatch(cvda::parse_args(argc, argv));
  } catch (const cvda::UsageError& e) {
    std::fprintf(stderr, "cvda: %s\n\n%s", e.what(), cvda::kUsage);
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cvda: error: %s\n", e.what());
    return 1;
  }
}
