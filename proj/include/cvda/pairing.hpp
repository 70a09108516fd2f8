// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "cvda/tensor.hpp"

namespace cvda {

// One confidently pseudo-labeled target row.
struct PseudoLabel {
  int row;
  int class_id;
  double confidence;  // max softmax probability
};

struct PseudoLabelResult {
  std::vector<PseudoLabel> accepted;  // in row order
  int n_rejected = 0;
};

// Confidence-thresholded argmax over row softmaxes. Ties go to the smaller
// class index. Total over any threshold: values above 1 simply reject all
// rows; the config layer owns range validation.
PseudoLabelResult pseudo_label(const Mat& target_logits, double threshold);

// Per-class bounded FIFO of detached source-embedding snapshots. Single
// owner: the Phase-2 training loop.
class PairQueueSet {
 public:
  struct Entry {
    Vec embedding;
    int64_t step;  // age marker: the training step that pushed it
  };

  PairQueueSet(int n_classes, int capacity);

  // Appends every row snapshot to its class queue, evicting the oldest
  // entries beyond capacity.
  void update(const Mat& source_embeddings, const std::vector<int>& labels,
              int64_t step);

  const std::deque<Entry>& queue(int class_id) const;
  int n_classes() const { return static_cast<int>(queues_.size()); }
  int capacity() const { return capacity_; }
  int64_t total_entries() const;

 private:
  std::vector<std::deque<Entry>> queues_;
  int capacity_;
};

// Aligned source/target rows for the correlation loss. Row i of `source`
// pairs with row i of `target`. source_row[i] is the in-batch source row
// that produced it, or -1 when the row came from a queue snapshot; only
// in-batch rows may route gradient back into the encoder's source pass.
struct PairBatch {
  Mat source;  // N x d
  Mat target;  // N x d
  std::vector<int> source_row;
  std::vector<int> target_row;
  std::vector<int> pseudo_class;
  int n_skipped_targets = 0;
  int n_in_batch = 0;
  int n_from_queue = 0;

  int size() const { return static_cast<int>(source_row.size()); }
  // Below two pairs the correlation term is skipped for the step.
  bool sufficient() const { return size() >= 2; }
};

// For each accepted target of pseudo-class c: every in-batch source of
// class c in batch order, capped at pairs_per_target; shortfalls top up
// from queue c newest first. Targets with nothing available are skipped
// and counted. Deterministic; the queue is read, never written.
PairBatch build_pairs(const Mat& target_embeddings,
                      const std::vector<PseudoLabel>& accepted,
                      const Mat& source_embeddings,
                      const std::vector<int>& source_labels,
                      const PairQueueSet& queues, int pairs_per_target);

}  // namespace cvda
