// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cvda/encoder.hpp"
#include "cvda/generator.hpp"
#include "cvda/tensor.hpp"
#include "cvda/types.hpp"

namespace cvda {

// Fraction of rows whose label ranks inside the top k when logits sort
// descending with ties broken toward the smaller class index. Throws
// unless 1 <= k <= K.
double topk_accuracy(const Mat& logits, const std::vector<int>& labels, int k);

// Classifier logits for the given manifest records, encoded in bounded
// chunks so evaluation never holds more than a handful of clips of
// activations. Row order follows `records`.
Mat score_records(const EncoderParams& p, const Corpus& corpus,
                  const std::vector<int>& records);

// One accuracy cell of the comparison matrix.
struct EvalCell {
  std::string baseline;
  std::string corpus;  // "home" or "foreign"
  int view = 1;
  int modality = kModSource;
  double top1 = 0.0;
  double top5 = 0.0;
  int n = 0;
};

struct EvalMatrix {
  std::vector<EvalCell> cells;
  int top_k = 5;  // the "top-5" column's k, clamped to K when K < 5
};

// Scores every baseline over: each view of the source modality plus the
// anchor view of the target modality on the home corpus test split, and
// the same anchor-view pair on the whole foreign corpus (never trained
// on, so all of it is test material). Home-corpus rows are selected by
// mapping each record's event key through the split assignment; a cell
// with no rows is an error. Checkpoints must agree on model dims.
EvalMatrix evaluate_matrix(
    const std::vector<std::pair<std::string, const EncoderParams*>>& baselines,
    const Corpus& home, const SplitAssignment& splits, const Corpus* foreign);

// Aligned plain-text table, baselines down, view/modality cells across,
// "top1/top5" percentages in each body cell.
std::string render_table(const EvalMatrix& m);

// Tab-separated cell records for downstream tooling.
void write_eval_tsv(const EvalMatrix& m, const std::filesystem::path& path);

// Convenience for the trainer's epoch loop: top-1 over the given records.
double top1_on_records(const EncoderParams& p, const Corpus& corpus,
                       const std::vector<int>& records);

}  // namespace cvda
