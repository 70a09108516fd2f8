// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cvda/config.hpp"
#include "cvda/encoder.hpp"
#include "cvda/generator.hpp"
#include "cvda/types.hpp"

namespace cvda {

// One optimizer step's bookkeeping. `aux` is the phase's second loss term
// (view-contrastive in phase 1, correlation alignment in phase 2) and
// `total` always reconciles as ce + weight * aux. The pairing counters
// stay zero in phase 1.
struct StepRecord {
  int phase = 1;
  int64_t step = 0;  // 0-based within the phase
  int epoch = 0;
  double lr = 0.0;
  double ce = 0.0;
  double aux = 0.0;
  double total = 0.0;
  bool aux_applied = false;  // the aux term had rows/pairs this step
  int accepted = 0;          // confident pseudo-labels
  int rejected = 0;
  int pairs = 0;
  int in_batch = 0;
  int from_queue = 0;
  int skipped_targets = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double val_top1 = 0.0;
};

struct PhaseResult {
  EncoderParams best_params;   // highest source-val top-1 (earliest on ties)
  EncoderParams final_params;  // after the last epoch
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_top1 = 0.0;
};

// View-invariant pretraining inputs: the labeled sync groups to train on
// and the anchor-view validation rows for epoch scoring.
struct Phase1Data {
  const Corpus* corpus = nullptr;
  std::vector<SyncGroup> train_groups;
  std::vector<int> val_records;
};
Phase1Data make_phase1_data(const Corpus& corpus,
                            const std::vector<SyncGroup>& groups,
                            const SplitAssignment& splits);

// Adaptation inputs. Target clips are detached copies with their labels
// erased, so the training loop has no label to read even by accident; the
// whole unlabeled target stream participates (adaptation needs no split
// because it never sees a target label).
struct Phase2Data {
  const Corpus* corpus = nullptr;
  std::vector<int> source_records;  // anchor view, source modality, train split
  std::vector<Clip> target_clips;   // every target-modality clip, unlabeled
  std::vector<int> val_records;     // source-domain val rows
};
Phase2Data make_phase2_data(const Corpus& corpus,
                            const std::vector<SyncGroup>& groups,
                            const SplitAssignment& splits);

// Phase 1: cross-entropy on anchor-view clips plus the weighted
// view-contrastive term over anchor/positive projection pairs. All
// parameters train; the best-validation checkpoint is retained.
PhaseResult train_phase1(const Phase1Data& data, const TrainConfig& cfg);

// Phase 2: starts from a phase-1 checkpoint, freezes the stem and lower
// blocks, and alternates source cross-entropy with the correlation
// alignment term over pseudo-labeled source/target pairs. The deliverable
// is the final epoch (adaptation quality is not measurable on source-side
// validation, and target labels are off-limits); best_params still tracks
// the best source-val epoch for reporting.
PhaseResult train_phase2(const EncoderParams& start, const Phase2Data& data,
                         const TrainConfig& cfg);

enum class BaselineKind {
  finetune_only,          // phase 1 with the contrastive weight zeroed
  finetune_contrastive,   // phase 1 as specified
  uda_only,               // zero-contrastive phase 1, then phase 2
  full_method,            // both phases as specified
};
std::string baseline_name(BaselineKind k);
BaselineKind parse_baseline_kind(const std::string& s);

struct BaselineRun {
  BaselineKind kind = BaselineKind::finetune_only;
  PhaseResult phase1;
  std::optional<PhaseResult> phase2;
  EncoderParams final_params;  // the checkpoint evaluation should score
};

BaselineRun run_baseline(BaselineKind kind, const Corpus& corpus,
                         const std::vector<SyncGroup>& groups,
                         const SplitAssignment& splits, const TrainConfig& cfg);

// All four baselines with the two phase-1 trainings shared: the plain and
// contrastive pretrainings each run once and feed their dependents, which
// is exactly what running each baseline separately would produce.
std::vector<BaselineRun> run_all_baselines(const Corpus& corpus,
                                           const std::vector<SyncGroup>& groups,
                                           const SplitAssignment& splits,
                                           const TrainConfig& cfg);

// Metrics serialization: one tab-separated record per line, deterministic
// shortest round-trip number formatting.
void write_step_metrics(const std::filesystem::path& path,
                        const std::vector<StepRecord>& steps);
void write_epoch_metrics(const std::filesystem::path& path,
                         const std::vector<EpochRecord>& epochs);

}  // namespace cvda
