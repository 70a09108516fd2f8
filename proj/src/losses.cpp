// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/losses.hpp"

#include <cmath>

#include "cvda/error.hpp"

namespace cvda {

CrossEntropyResult cross_entropy(const Mat& logits, const std::vector<int>& labels) {
  const auto B = logits.rows();
  const auto K = logits.cols();
  check(B >= 1, "cross_entropy: empty batch");
  check(static_cast<Eigen::Index>(labels.size()) == B, "cross_entropy: label count mismatch");
  check(logits.allFinite(), "cross_entropy: non-finite logits");

  CrossEntropyResult out;
  out.grad.setZero(B, K);
  double total = 0.0;
  for (Eigen::Index n = 0; n < B; ++n) {
    int y = labels[n];
    check(y >= 0 && y < K, "cross_entropy: label out of range");
    double mx = logits.row(n).maxCoeff();
    Eigen::ArrayXd e = (logits.row(n).array() - mx).exp();
    double z = e.sum();
    // -log softmax[y] = log(sum exp) - (logit_y - mx)
    total += std::log(z) - (logits(n, y) - mx);
    out.grad.row(n) = (e / z).matrix();
    out.grad(n, y) -= 1.0;
  }
  out.grad /= static_cast<double>(B);
  out.value = total / static_cast<double>(B);
  return out;
}

SupConResult supcon_loss(const Mat& z, const std::vector<int>& labels, double tau) {
  const auto M = z.rows();
  check(tau > 0.0, "supcon_loss: tau must be > 0");
  check(M >= 2, "supcon_loss: need at least 2 rows");
  check(static_cast<Eigen::Index>(labels.size()) == M, "supcon_loss: label count mismatch");
  for (Eigen::Index i = 0; i < M; ++i)
    check(std::fabs(z.row(i).norm() - 1.0) <= 1e-5,
          "supcon_loss: projections must be unit-norm");

  // S_ik = z_i . z_k; per anchor, a softmax over the other 2B-1 rows.
  Mat S = z * z.transpose();

  Mat G = Mat::Zero(M, M);  // dL/dS
  double outer_sum = 0.0;
  int anchors_used = 0;

  // First pass to count usable anchors (the outer normalizer needs it).
  std::vector<int> n_pos(M, 0);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index p = 0; p < M; ++p)
      if (p != i && labels[p] == labels[i]) ++n_pos[i];
  for (Eigen::Index i = 0; i < M; ++i)
    if (n_pos[i] > 0) ++anchors_used;
  check(anchors_used > 0, "supcon_loss: no positive pairs");

  for (Eigen::Index i = 0; i < M; ++i) {
    if (n_pos[i] == 0) continue;

    // Stable log-sum-exp over k != i.
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < M; ++k)
      if (k != i) mx = std::max(mx, S(i, k) / tau);
    double denom = 0.0;
    for (Eigen::Index k = 0; k < M; ++k)
      if (k != i) denom += std::exp(S(i, k) / tau - mx);
    double log_denom = std::log(denom) + mx;

    double inner = 0.0;
    for (Eigen::Index p = 0; p < M; ++p)
      if (p != i && labels[p] == labels[i]) inner += log_denom - S(i, p) / tau;
    outer_sum += inner / n_pos[i];

    // dL/dS_ik = alpha_i * (|P(i)| * q_ik - [k in P(i)]) / tau with
    // alpha_i = 1 / (anchors_used * |P(i)|) and q the anchor's softmax.
    double alpha = 1.0 / (static_cast<double>(anchors_used) * n_pos[i]);
    for (Eigen::Index k = 0; k < M; ++k) {
      if (k == i) continue;
      double q = std::exp(S(i, k) / tau - mx) / denom;
      double indicator = (labels[k] == labels[i]) ? 1.0 : 0.0;
      G(i, k) = alpha * (n_pos[i] * q - indicator) / tau;
    }
  }

  SupConResult out;
  out.value = outer_sum / anchors_used;
  out.n_anchors_used = anchors_used;
  // S enters both as anchor row and as candidate column: dL/dZ = (G + G^T) Z.
  out.grad = (G + G.transpose()) * z;
  return out;
}

namespace {

// Column standardization: xhat = (x - mean) / sd with population sd floored
// at 1e-8. Returns the floored-column flags for gradient handling.
struct Standardized {
  Mat xhat;
  Vec sd;                      // post-floor
  std::vector<bool> floored;   // per column
  int n_floored = 0;
};

Standardized standardize(const Mat& x) {
  const auto N = x.rows();
  const auto d = x.cols();
  Standardized st;
  st.xhat.resize(N, d);
  st.sd.resize(d);
  st.floored.assign(d, false);
  for (Eigen::Index j = 0; j < d; ++j) {
    double mean = x.col(j).mean();
    double var = (x.col(j).array() - mean).square().sum() / static_cast<double>(N);
    double sd = std::sqrt(var);
    if (sd < 1e-8) {
      sd = 1e-8;
      st.floored[j] = true;
      ++st.n_floored;
    }
    st.sd(j) = sd;
    st.xhat.col(j) = (x.col(j).array() - mean) / sd;
  }
  return st;
}

// Backward through standardization. For a live column,
//   dL/dx_n = (g_n - mean(g) - xhat_n * mean(g * xhat)) / sd;
// a floored column's sd acted as a constant, so its xhat term drops.
Mat standardize_backward(const Standardized& st, const Mat& grad_xhat) {
  const auto N = grad_xhat.rows();
  const auto d = grad_xhat.cols();
  Mat grad(N, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double gmean = grad_xhat.col(j).mean();
    if (st.floored[j]) {
      grad.col(j) = (grad_xhat.col(j).array() - gmean) / st.sd(j);
    } else {
      double gx = (grad_xhat.col(j).array() * st.xhat.col(j).array()).mean();
      grad.col(j) =
          (grad_xhat.col(j).array() - gmean - st.xhat.col(j).array() * gx) / st.sd(j);
    }
  }
  return grad;
}

}  // namespace

IbResult ib_loss(const Mat& source_feats, const Mat& target_feats,
                 double lambda_offdiag) {
  const auto N = source_feats.rows();
  const auto d = source_feats.cols();
  check(N >= 2, "ib_loss: need at least 2 pairs");
  check(target_feats.rows() == N && target_feats.cols() == d,
        "ib_loss: source/target shape mismatch");
  check(lambda_offdiag >= 0.0, "ib_loss: lambda_offdiag must be >= 0");

  Standardized s = standardize(source_feats);
  Standardized t = standardize(target_feats);

  IbResult out;
  out.n_floored_dims = s.n_floored + t.n_floored;
  out.corr = (s.xhat.transpose() * t.xhat) / static_cast<double>(N);

  double loss = 0.0;
  Mat G(d, d);  // dL/dC
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i == j) {
        double r = 1.0 - out.corr(i, i);
        loss += r * r;
        G(i, i) = -2.0 * r;
      } else {
        loss += lambda_offdiag * out.corr(i, j) * out.corr(i, j);
        G(i, j) = 2.0 * lambda_offdiag * out.corr(i, j);
      }
    }
  }
  out.value = loss;

  Mat grad_shat = (t.xhat * G.transpose()) / static_cast<double>(N);
  Mat grad_that = (s.xhat * G) / static_cast<double>(N);
  out.grad_source = standardize_backward(s, grad_shat);
  out.grad_target = standardize_backward(t, grad_that);
  return out;
}

LossValue phase1_total(double ce, double cl, double lambda1) {
  LossValue v;
  v.value = ce + lambda1 * cl;
  v.components = {{"ce", ce}, {"cl", cl}, {"lambda1", lambda1}};
  return v;
}

LossValue phase2_total(double ce, double ib, double alpha) {
  LossValue v;
  v.value = ce + alpha * ib;
  v.components = {{"ce", ce}, {"ib", ib}, {"alpha", alpha}};
  return v;
}

Mat l2_normalize_rows(const Mat& x, int* zero_rows) {
  Mat y(x.rows(), x.cols());
  int zeros = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double n = x.row(i).norm();
    if (n < 1e-12) {
      // Defined fallback so downstream cosine math stays well-posed.
      y.row(i).setZero();
      y(i, 0) = 1.0;
      ++zeros;
    } else {
      y.row(i) = x.row(i) / n;
    }
  }
  if (zero_rows) *zero_rows = zeros;
  return y;
}

Mat l2_normalize_rows_backward(const Mat& x, const Mat& grad_y) {
  Mat grad(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double n = x.row(i).norm();
    if (n < 1e-12) {
      grad.row(i).setZero();  // fallback output is constant
      continue;
    }
    Eigen::RowVectorXd y = x.row(i) / n;
    double gy = grad_y.row(i).dot(y);
    grad.row(i) = (grad_y.row(i) - gy * y) / n;
  }
  return grad;
}

}  // namespace cvda
