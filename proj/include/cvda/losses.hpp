// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "cvda/tensor.hpp"

namespace cvda {

// A scalar loss plus its named sub-terms, so the metrics log can always
// reconcile total = ce + weight * other.
struct LossValue {
  double value = 0.0;
  std::map<std::string, double> components;
};

// Mean cross-entropy over the batch.
//   L = (1/B) sum_n -log softmax(logits_n)[labels_n]
// computed with max subtraction. grad is dL/dlogits = (softmax - onehot)/B.
struct CrossEntropyResult {
  double value = 0.0;
  Mat grad;  // B x K
};
CrossEntropyResult cross_entropy(const Mat& logits, const std::vector<int>& labels);

// Supervised contrastive loss over 2B unit-norm projection rows.
// For each anchor i with nonempty positive set P(i) = {p != i : y_p = y_i}:
//   L_i = -(1/|P(i)|) sum_{p in P(i)} log( exp(z_i.z_p/tau) / sum_{k != i} exp(z_i.z_k/tau) )
// and the loss is the mean of L_i over anchors with |P(i)| > 0. Anchors
// without positives are excluded from the outer normalizer.
// grad is dL/dz (raw, not tangent-projected); callers that need the
// derivative through an L2 normalization must compose it themselves.
struct SupConResult {
  double value = 0.0;
  Mat grad;  // 2B x d_proj
  int n_anchors_used = 0;
};
SupConResult supcon_loss(const Mat& projections, const std::vector<int>& labels,
                         double tau);

// Cross-correlation alignment loss over N paired rows.
// Both sides are standardized per column across the batch (population
// standard deviation, floored at 1e-8), C = shat^T that / N, and
//   L = sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2.
// Gradients flow through the standardization (mean and sigma are functions
// of the batch); a floored column contributes no sigma term.
struct IbResult {
  double value = 0.0;
  Mat corr;         // d x d
  Mat grad_source;  // N x d
  Mat grad_target;  // N x d
  int n_floored_dims = 0;
};
IbResult ib_loss(const Mat& source_feats, const Mat& target_feats,
                 double lambda_offdiag);

LossValue phase1_total(double ce, double cl, double lambda1);
LossValue phase2_total(double ce, double ib, double alpha);

// Row-wise L2 normalization and the matching backward, shared by the
// projection head and the gradient checks. Rows with norm below `eps`
// fall back to the first basis vector; the count of such rows is returned
// through zero_rows when non-null.
Mat l2_normalize_rows(const Mat& x, int* zero_rows = nullptr);

// Given y = x / ||x|| per row and dL/dy, returns dL/dx.
Mat l2_normalize_rows_backward(const Mat& x, const Mat& grad_y);

}  // namespace cvda
