// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/gradcheck.hpp"

#include <cmath>

#include "cvda/config.hpp"
#include "cvda/encoder.hpp"
#include "cvda/error.hpp"
#include "cvda/losses.hpp"
#include "cvda/rng.hpp"
#include "cvda/tensor.hpp"
#include "cvda/types.hpp"

namespace cvda {

FdReport fd_check(const std::string& name,
                  const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& x0, const std::vector<double>& analytic,
                  double step, double rel_tol, double abs_tol, double scale_floor,
                  const std::vector<int>& coords) {
  check(x0.size() == analytic.size(), "fd_check: gradient size mismatch");
  FdReport r;
  r.name = name;
  r.rel_tol = rel_tol;
  r.abs_tol = abs_tol;

  std::vector<int> idx = coords;
  if (idx.empty()) {
    idx.resize(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) idx[i] = static_cast<int>(i);
  }
  r.n_coords = static_cast<int>(idx.size());

  std::vector<double> x = x0;
  for (int i : idx) {
    double keep = x[i];
    x[i] = keep + step;
    double fp = f(x);
    x[i] = keep - step;
    double fm = f(x);
    x[i] = keep;

    double fd = (fp - fm) / (2.0 * step);
    double an = analytic[i];
    double scale = std::max(std::fabs(fd), std::fabs(an));
    double diff = std::fabs(fd - an);
    if (scale >= scale_floor) {
      r.max_rel = std::max(r.max_rel, diff / scale);
    } else {
      r.max_abs_tiny = std::max(r.max_abs_tiny, diff);
    }
  }
  return r;
}

namespace {

std::vector<double> flatten(const Mat& m) {
  std::vector<double> v(m.size());
  // Row-major flattening keeps coordinate indices human-readable.
  int k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[k++] = m(i, j);
  return v;
}

Mat unflatten(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  int k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[k++];
  return m;
}

}  // namespace

std::vector<FdReport> loss_gradchecks(uint64_t seed, int instances, double rel_tol) {
  std::vector<FdReport> reports;
  Rng rng(derive_stream(seed, "gradcheck/losses"));
  const double step = 1e-4;

  for (int inst = 0; inst < instances; ++inst) {
    // Cross-entropy w.r.t. logits.
    {
      int B = 2 + static_cast<int>(rng.index(7));  // 2..8
      int K = 2 + static_cast<int>(rng.index(5));  // 2..6
      Mat logits(B, K);
      for (Eigen::Index i = 0; i < logits.size(); ++i)
        logits.data()[i] = rng.normal(0.0, 2.0);
      std::vector<int> labels(B);
      for (int i = 0; i < B; ++i) labels[i] = static_cast<int>(rng.index(K));

      auto res = cross_entropy(logits, labels);
      auto f = [&](const std::vector<double>& x) {
        return cross_entropy(unflatten(x, B, K), labels).value;
      };
      reports.push_back(fd_check("cross_entropy[" + std::to_string(inst) + "]", f,
                                 flatten(logits), flatten(res.grad), step, rel_tol));
    }

    // Contrastive loss through row normalization, w.r.t. raw projections.
    // The composition keeps the loss's unit-norm precondition satisfied at
    // every probe point, and its analytic gradient is the normalize backward
    // applied to the loss gradient.
    {
      int B = 2 + static_cast<int>(rng.index(3));  // B groups -> 2B rows (4..8)
      int d = 2 + static_cast<int>(rng.index(7));  // 2..8
      int n_classes = 2 + static_cast<int>(rng.index(2));
      int rows = 2 * B;
      Mat raw(rows, d);
      for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = rng.normal(0.0, 1.0);
      std::vector<int> labels(rows);
      for (int i = 0; i < B; ++i) {
        labels[i] = static_cast<int>(rng.index(n_classes));
        labels[B + i] = labels[i];  // duplicated labels, as in training
      }
      double tau = 0.1 + 0.4 * rng.uniform();

      Mat z = l2_normalize_rows(raw);
      auto res = supcon_loss(z, labels, tau);
      Mat grad_raw = l2_normalize_rows_backward(raw, res.grad);
      auto f = [&](const std::vector<double>& x) {
        Mat zx = l2_normalize_rows(unflatten(x, rows, d));
        return supcon_loss(zx, labels, tau).value;
      };
      reports.push_back(fd_check("supcon_norm[" + std::to_string(inst) + "]", f,
                                 flatten(raw), flatten(grad_raw), step, rel_tol));
    }

    // Alignment loss w.r.t. both sides jointly.
    {
      int N = 3 + static_cast<int>(rng.index(6));  // 3..8
      int d = 2 + static_cast<int>(rng.index(7));  // 2..8
      Mat s(N, d), t(N, d);
      for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal(0.0, 1.5);
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, 1.5);
      double lambda = 5e-3 + 0.1 * rng.uniform();

      auto res = ib_loss(s, t, lambda);
      std::vector<double> x0 = flatten(s);
      std::vector<double> gt = flatten(res.grad_source);
      {
        auto tail = flatten(t);
        x0.insert(x0.end(), tail.begin(), tail.end());
        auto gtail = flatten(res.grad_target);
        gt.insert(gt.end(), gtail.begin(), gtail.end());
      }
      auto f = [&](const std::vector<double>& x) {
        std::vector<double> xs(x.begin(), x.begin() + N * d);
        std::vector<double> xt(x.begin() + N * d, x.end());
        return ib_loss(unflatten(xs, N, d), unflatten(xt, N, d), lambda).value;
      };
      reports.push_back(
          fd_check("ib[" + std::to_string(inst) + "]", f, x0, gt, step, rel_tol));
    }
  }
  return reports;
}

std::vector<FdReport> encoder_gradchecks(uint64_t seed, int instances, double rel_tol) {
  std::vector<FdReport> reports;
  const double step = 1e-4;

  TrainConfig cfg;
  cfg.d_model = 8;
  cfg.n_blocks = 2;
  cfg.n_heads = 2;
  cfg.patch_t = 2;
  cfg.patch_hw = 8;
  cfg.d_proj = 4;
  cfg.K = 4;
  cfg.T = 2;
  cfg.H = 8;
  cfg.W = 8;
  cfg.C = 3;

  for (int inst = 0; inst < instances; ++inst) {
    EncoderParams params = make_encoder(cfg);
    Rng prng(derive_stream(seed, "gradcheck/encoder-params", inst));
    // A generic point, not the training init: sigma-0.02 weights leave most
    // deep-parameter gradients below the relative-check floor, which would
    // quietly turn the sweep into an absolute-noise check.
    for (auto& ref : param_refs(params)) {
      for (Eigen::Index i = 0; i < ref.size(); ++i) {
        if (ref.is_weight) {
          ref.data[i] = prng.normal(0.0, 0.3);
        } else if (ref.is_ln_gain) {
          ref.data[i] = 1.0 + prng.normal(0.0, 0.2);
        } else {
          ref.data[i] = prng.normal(0.0, 0.1);
        }
      }
    }

    Rng drng(derive_stream(seed, "gradcheck/encoder-data", inst));
    const int B = 2;
    std::vector<Clip> clips(B);
    std::vector<const Clip*> batch;
    std::vector<int> labels(B);
    for (int b = 0; b < B; ++b) {
      Clip& clip = clips[b];
      clip.T = cfg.T;
      clip.H = cfg.H;
      clip.W = cfg.W;
      clip.C = cfg.C;
      clip.data.resize(clip.size());
      for (auto& v : clip.data) v = static_cast<float>(drng.normal());
      batch.push_back(&clip);
      labels[b] = static_cast<int>(drng.index(cfg.K));
    }

    auto refs = param_refs(params);
    std::vector<double> x0;
    for (auto& ref : refs)
      x0.insert(x0.end(), ref.data, ref.data + ref.size());

    ForwardCache cache;
    Mat z = encode_batch_cached(params, batch, cache);
    Mat logits = classify_batch(params, z);
    auto ce = cross_entropy(logits, labels);
    EncoderParams grads = make_encoder(cfg);
    Mat grad_z = Mat::Zero(B, cfg.d_model);
    classify_backward(params, z, ce.grad, grads, grad_z);
    encode_backward(params, cache, grad_z, grads);

    std::vector<double> analytic;
    for (auto& ref : param_refs(grads))
      analytic.insert(analytic.end(), ref.data, ref.data + ref.size());

    EncoderParams probe = make_encoder(cfg);
    auto probe_refs = param_refs(probe);
    auto f = [&](const std::vector<double>& x) {
      size_t k = 0;
      for (auto& ref : probe_refs)
        for (Eigen::Index i = 0; i < ref.size(); ++i) ref.data[i] = x[k++];
      Mat zz = encode_batch(probe, batch);
      return cross_entropy(classify_batch(probe, zz), labels).value;
    };
    reports.push_back(fd_check("encoder_ce[" + std::to_string(inst) + "]", f, x0,
                               analytic, step, rel_tol));
  }
  return reports;
}

}  // namespace cvda
