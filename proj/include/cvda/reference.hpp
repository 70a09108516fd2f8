// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "cvda/encoder.hpp"
#include "cvda/manifest.hpp"
#include "cvda/types.hpp"

namespace cvda::ref {

// Straight-line, loop-based reference implementations used to verify the
// vectorized production code. Everything here is deliberately naive: plain
// nested loops over std::vector<double>, no Eigen arithmetic (parameters
// are read one coefficient at a time), no shared helpers with the fast
// paths. Keep it that way; the whole point is an independent second route
// to the same numbers.

using Rows = std::vector<std::vector<double>>;  // row-major matrices

// Numerically stable softmax of one row (max subtraction).
std::vector<double> softmax(const std::vector<double>& logits);

// Mean over rows of -log softmax(logits_row)[label_row].
double cross_entropy(const Rows& logits, const std::vector<int>& labels);

// Supervised contrastive loss over unit-norm rows: for each anchor i with a
// nonempty same-label positive set P(i), average over p in P(i) of
//   -log( exp(z_i.z_p / tau) / sum_{k != i} exp(z_i.z_k / tau) )
// then average over those anchors.
double supcon(const Rows& proj, const std::vector<int>& labels, double tau);

// Cross-correlation alignment loss. Standardizes each column of both sides
// across the N pairs (epsilon-floored population standard deviation),
// forms C[i][j] = mean_n shat[n][i] * that[n][j], and returns
//   sum_i (1 - C[i][i])^2 + lambda * sum_{i != j} C[i][j]^2.
double ib(const Rows& source, const Rows& target, double lambda_offdiag);

// The correlation matrix by the same recipe, for inspection in tests.
Rows ib_correlation(const Rows& source, const Rows& target);

// True iff labels[row] is among the k largest logits of the row, ranking by
// (larger logit, then smaller class index).
bool topk_hit(const std::vector<double>& logits, int label, int k);

double topk_accuracy(const Rows& logits, const std::vector<int>& labels, int k);

// Confident pseudo-labels: (row, argmax class, max softmax) for every row
// whose max softmax reaches the threshold.
struct PseudoLabel {
  int row;
  int class_id;
  double confidence;
};
std::vector<PseudoLabel> pseudo_labels(const Rows& logits, double threshold);

// Quadratic-time synchronization: for every anchor-view record, scan every
// record of every positive view for same-class candidates overlapping by at
// least min_overlap frames; keep the best by (overlap desc, start_frame asc,
// clip_ref asc). Mirrors the production contract but shares no code with it.
std::vector<SyncGroup> brute_force_sync_groups(const Manifest& manifest,
                                               int min_overlap_frames);

// Scalar-loop encoder forward for one clip: patch embedding, class token,
// position table, pre-norm attention blocks, class-token readout. A second
// route to the same embedding as the batched GEMM path.
std::vector<double> encode_clip(const EncoderParams& p, const Clip& clip);

// Scalar-loop heads over an embedding from encode_clip.
std::vector<double> classify_embedding(const EncoderParams& p,
                                       const std::vector<double>& z);
std::vector<double> project_embedding(const EncoderParams& p,
                                      const std::vector<double>& z);

}  // namespace cvda::ref
