// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/pairing.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cvda {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

PseudoLabelResult pseudo_label(const Mat& target_logits, double threshold) {
  PseudoLabelResult out;
  const int n = static_cast<int>(target_logits.rows());
  const int k = static_cast<int>(target_logits.cols());
  check(k >= 1, "pseudo_label needs at least one class column");
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < k; ++j) {
      if (target_logits(i, j) > target_logits(i, best)) best = j;
    }
    // Max-subtracted softmax; the winning class has exp(0) = 1 on top.
    double denom = 0.0;
    for (int j = 0; j < k; ++j) {
      denom += std::exp(target_logits(i, j) - target_logits(i, best));
    }
    const double conf = 1.0 / denom;
    if (conf >= threshold) {
      out.accepted.push_back({i, best, conf});
    } else {
      ++out.n_rejected;
    }
  }
  return out;
}

PairQueueSet::PairQueueSet(int n_classes, int capacity)
    : queues_(static_cast<size_t>(n_classes > 0 ? n_classes : 0)),
      capacity_(capacity) {
  check(n_classes >= 1, "queue set needs at least one class");
  check(capacity >= 1, "queue capacity must be >= 1");
}

void PairQueueSet::update(const Mat& source_embeddings,
                          const std::vector<int>& labels, int64_t step) {
  check(static_cast<size_t>(source_embeddings.rows()) == labels.size(),
        "embedding rows and labels disagree");
  for (size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    check(c >= 0 && c < n_classes(), "label out of class range");
    auto& q = queues_[static_cast<size_t>(c)];
    q.push_back({source_embeddings.row(static_cast<Eigen::Index>(i))
                     .transpose()
                     .eval(),
                 step});
    while (static_cast<int>(q.size()) > capacity_) q.pop_front();
  }
}

const std::deque<PairQueueSet::Entry>& PairQueueSet::queue(
    int class_id) const {
  check(class_id >= 0 && class_id < n_classes(), "class id out of range");
  return queues_[static_cast<size_t>(class_id)];
}

int64_t PairQueueSet::total_entries() const {
  int64_t n = 0;
  for (const auto& q : queues_) n += static_cast<int64_t>(q.size());
  return n;
}

PairBatch build_pairs(const Mat& target_embeddings,
                      const std::vector<PseudoLabel>& accepted,
                      const Mat& source_embeddings,
                      const std::vector<int>& source_labels,
                      const PairQueueSet& queues, int pairs_per_target) {
  check(pairs_per_target >= 1, "pairs_per_target must be >= 1");
  check(static_cast<size_t>(source_embeddings.rows()) == source_labels.size(),
        "source rows and labels disagree");
  const Eigen::Index d = source_embeddings.rows() > 0
                             ? source_embeddings.cols()
                             : target_embeddings.cols();
  check(target_embeddings.cols() == d || target_embeddings.rows() == 0,
        "source and target embedding widths disagree");

  struct Picked {
    int target_row;
    int source_row;  // -1 for queue snapshots
    const Vec* snapshot;
    int pseudo_class;
  };
  std::vector<Picked> picked;
  PairBatch out;

  for (const PseudoLabel& t : accepted) {
    check(t.row >= 0 && t.row < target_embeddings.rows(),
          "accepted target row out of range");
    const int c = t.class_id;
    int taken = 0;
    for (size_t s = 0; s < source_labels.size() && taken < pairs_per_target;
         ++s) {
      if (source_labels[s] != c) continue;
      picked.push_back({t.row, static_cast<int>(s), nullptr, c});
      ++taken;
      ++out.n_in_batch;
    }
    if (taken < pairs_per_target && c >= 0 && c < queues.n_classes()) {
      const auto& q = queues.queue(c);
      for (auto it = q.rbegin(); it != q.rend() && taken < pairs_per_target;
           ++it) {
        picked.push_back({t.row, -1, &it->embedding, c});
        ++taken;
        ++out.n_from_queue;
      }
    }
    if (taken == 0) ++out.n_skipped_targets;
  }

  const Eigen::Index n = static_cast<Eigen::Index>(picked.size());
  out.source.resize(n, d);
  out.target.resize(n, d);
  out.source_row.reserve(picked.size());
  out.target_row.reserve(picked.size());
  out.pseudo_class.reserve(picked.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Picked& p = picked[static_cast<size_t>(i)];
    if (p.source_row >= 0) {
      out.source.row(i) = source_embeddings.row(p.source_row);
    } else {
      out.source.row(i) = p.snapshot->transpose();
    }
    out.target.row(i) = target_embeddings.row(p.target_row);
    out.source_row.push_back(p.source_row);
    out.target_row.push_back(p.target_row);
    out.pseudo_class.push_back(p.pseudo_class);
  }
  return out;
}

}  // namespace cvda
