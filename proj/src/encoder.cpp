// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/encoder.hpp"

#include <cmath>

#include "cvda/error.hpp"
#include "cvda/losses.hpp"

namespace cvda {

namespace {

constexpr double kLnEps = 1e-5;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  // d/dx [0.5 x (1 + erf(x/sqrt(2)))]
  double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

// Row-wise pre-norm LayerNorm: xhat = (x - mean) * rstd, y = xhat*gamma + beta.
void layer_norm(const Mat& x, const Vec& gamma, const Vec& beta, Mat& xhat, Vec& rstd,
                Mat& y) {
  const auto rows = x.rows();
  const auto d = x.cols();
  xhat.resize(rows, d);
  y.resize(rows, d);
  rstd.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double mean = x.row(i).mean();
    double var = (x.row(i).array() - mean).square().mean();
    double r = 1.0 / std::sqrt(var + kLnEps);
    rstd(i) = r;
    xhat.row(i) = ((x.row(i).array() - mean) * r).matrix();
    y.row(i) = (xhat.row(i).array() * gamma.transpose().array() +
                beta.transpose().array())
                   .matrix();
  }
}

// Backward through LayerNorm. Returns dL/dx and accumulates dgamma/dbeta.
Mat layer_norm_backward(const Mat& xhat, const Vec& rstd, const Vec& gamma,
                        const Mat& grad_y, Vec& dgamma, Vec& dbeta) {
  const auto rows = xhat.rows();
  const auto d = xhat.cols();
  Mat grad_x(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    dgamma.array() += (grad_y.row(i).array() * xhat.row(i).array()).transpose();
    dbeta.array() += grad_y.row(i).transpose().array();
    Eigen::ArrayXd dxhat = grad_y.row(i).transpose().array() * gamma.array();
    double m1 = dxhat.mean();
    double m2 = (dxhat * xhat.row(i).transpose().array()).mean();
    grad_x.row(i) =
        (rstd(i) * (dxhat - m1 - xhat.row(i).transpose().array() * m2)).transpose();
  }
  return grad_x;
}

// y = x * W^T + b, fused over all token rows.
Mat linear(const Mat& x, const Mat& w, const Vec& b) {
  return (x * w.transpose()).rowwise() + b.transpose();
}

// Backward of `linear`, accumulating into dw/db.
Mat linear_backward(const Mat& x, const Mat& w, const Mat& grad_y, Mat& dw, Vec& db) {
  dw.noalias() += grad_y.transpose() * x;
  db.noalias() += grad_y.colwise().sum().transpose();
  return grad_y * w;
}

}  // namespace

int EncoderParams::n_patches() const {
  return (T / patch_t) * (H / patch_hw) * (W / patch_hw);
}

EncoderParams make_encoder(const TrainConfig& cfg) {
  require_valid(cfg);
  EncoderParams p;
  p.d_model = cfg.d_model;
  p.n_blocks = cfg.n_blocks;
  p.n_heads = cfg.n_heads;
  p.patch_t = cfg.patch_t;
  p.patch_hw = cfg.patch_hw;
  p.d_proj = cfg.d_proj;
  p.K = cfg.K;
  p.T = cfg.T;
  p.H = cfg.H;
  p.W = cfg.W;
  p.C = cfg.C;

  const int d = p.d_model;
  p.patch_weight.setZero(d, p.patch_vol());
  p.patch_bias.setZero(d);
  p.pos_embed.setZero(p.n_tokens(), d);
  p.cls_token.setZero(d);
  p.blocks.resize(p.n_blocks);
  for (auto& blk : p.blocks) {
    blk.ln1_gamma.setZero(d);
    blk.ln1_beta.setZero(d);
    blk.attn.wq.setZero(d, d);
    blk.attn.wk.setZero(d, d);
    blk.attn.wv.setZero(d, d);
    blk.attn.wo.setZero(d, d);
    blk.attn.bq.setZero(d);
    blk.attn.bk.setZero(d);
    blk.attn.bv.setZero(d);
    blk.attn.bo.setZero(d);
    blk.ln2_gamma.setZero(d);
    blk.ln2_beta.setZero(d);
    blk.mlp_w1.setZero(p.d_hidden(), d);
    blk.mlp_b1.setZero(p.d_hidden());
    blk.mlp_w2.setZero(d, p.d_hidden());
    blk.mlp_b2.setZero(d);
  }
  p.cls_weight.setZero(p.K, d);
  p.cls_bias.setZero(p.K);
  p.proj_w1.setZero(d, d);
  p.proj_b1.setZero(d);
  p.proj_w2.setZero(p.d_proj, d);
  p.proj_b2.setZero(p.d_proj);
  return p;
}

std::vector<ParamRef> param_refs(EncoderParams& p) {
  std::vector<ParamRef> refs;
  auto add = [&](const std::string& name, Mat& m, int blk, bool stem, bool weight,
                 bool gain = false) {
    refs.push_back({name, m.data(), m.rows(), m.cols(), blk, stem, weight, gain});
  };
  auto addv = [&](const std::string& name, Vec& v, int blk, bool stem, bool weight,
                  bool gain = false) {
    refs.push_back({name, v.data(), v.size(), 1, blk, stem, weight, gain});
  };

  add("patch_embed.weight", p.patch_weight, -1, true, true);
  addv("patch_embed.bias", p.patch_bias, -1, true, false);
  add("pos_embed", p.pos_embed, -1, true, true);
  addv("cls_token", p.cls_token, -1, false, false);
  for (int b = 0; b < p.n_blocks; ++b) {
    auto& blk = p.blocks[b];
    std::string prefix = "blocks." + std::to_string(b) + ".";
    addv(prefix + "ln1.gamma", blk.ln1_gamma, b, false, false, true);
    addv(prefix + "ln1.beta", blk.ln1_beta, b, false, false);
    add(prefix + "attn.wq", blk.attn.wq, b, false, true);
    addv(prefix + "attn.bq", blk.attn.bq, b, false, false);
    add(prefix + "attn.wk", blk.attn.wk, b, false, true);
    addv(prefix + "attn.bk", blk.attn.bk, b, false, false);
    add(prefix + "attn.wv", blk.attn.wv, b, false, true);
    addv(prefix + "attn.bv", blk.attn.bv, b, false, false);
    add(prefix + "attn.wo", blk.attn.wo, b, false, true);
    addv(prefix + "attn.bo", blk.attn.bo, b, false, false);
    addv(prefix + "ln2.gamma", blk.ln2_gamma, b, false, false, true);
    addv(prefix + "ln2.beta", blk.ln2_beta, b, false, false);
    add(prefix + "mlp.w1", blk.mlp_w1, b, false, true);
    addv(prefix + "mlp.b1", blk.mlp_b1, b, false, false);
    add(prefix + "mlp.w2", blk.mlp_w2, b, false, true);
    addv(prefix + "mlp.b2", blk.mlp_b2, b, false, false);
  }
  add("classifier.weight", p.cls_weight, -1, false, true);
  addv("classifier.bias", p.cls_bias, -1, false, false);
  add("projector.w1", p.proj_w1, -1, false, true);
  addv("projector.b1", p.proj_b1, -1, false, false);
  add("projector.w2", p.proj_w2, -1, false, true);
  addv("projector.b2", p.proj_b2, -1, false, false);
  return refs;
}

void init_encoder(EncoderParams& p, Rng& rng) {
  for (auto& ref : param_refs(p)) {
    if (ref.is_weight) {
      for (Eigen::Index i = 0; i < ref.size(); ++i)
        ref.data[i] = rng.truncated_normal(0.02);
    } else if (ref.is_ln_gain) {
      for (Eigen::Index i = 0; i < ref.size(); ++i) ref.data[i] = 1.0;
    } else {
      for (Eigen::Index i = 0; i < ref.size(); ++i) ref.data[i] = 0.0;
    }
  }
}

void zero_params(EncoderParams& p) {
  for (auto& ref : param_refs(p))
    for (Eigen::Index i = 0; i < ref.size(); ++i) ref.data[i] = 0.0;
}

FreezeMask make_freeze_mask(double freeze_fraction, int n_blocks) {
  check(freeze_fraction >= 0.0 && freeze_fraction <= 1.0,
        "freeze_fraction ∈ [0,1]");
  FreezeMask m;
  m.freeze_stem = true;
  m.frozen_blocks = static_cast<int>(std::floor(freeze_fraction * n_blocks));
  return m;
}

bool is_frozen(const ParamRef& ref, const FreezeMask& mask) {
  if (ref.is_stem) return mask.freeze_stem;
  if (ref.block_index >= 0) return ref.block_index < mask.frozen_blocks;
  return false;  // class token, classifier, projector
}

std::vector<ParamRef> trainable_params(EncoderParams& p, const FreezeMask& mask) {
  check(mask.frozen_blocks >= 0 && mask.frozen_blocks <= p.n_blocks,
        "freeze mask names more blocks than the model has");
  std::vector<ParamRef> out;
  for (auto& ref : param_refs(p))
    if (!is_frozen(ref, mask)) out.push_back(ref);
  return out;
}

Mat patchify(const Clip& clip, int patch_t, int patch_hw) {
  check(clip.T % patch_t == 0, "clip T not divisible by patch_t");
  check(clip.H % patch_hw == 0, "clip H not divisible by patch_hw");
  check(clip.W % patch_hw == 0, "clip W not divisible by patch_hw");
  check(clip.data.size() == clip.size(), "clip payload size mismatch");

  const int nt = clip.T / patch_t;
  const int nh = clip.H / patch_hw;
  const int nw = clip.W / patch_hw;
  const int vol = patch_t * patch_hw * patch_hw * clip.C;
  Mat x(nt * nh * nw, vol);
  for (int pt = 0; pt < nt; ++pt)
    for (int ph = 0; ph < nh; ++ph)
      for (int pw = 0; pw < nw; ++pw) {
        int row = (pt * nh + ph) * nw + pw;
        int col = 0;
        for (int lt = 0; lt < patch_t; ++lt)
          for (int lh = 0; lh < patch_hw; ++lh)
            for (int lw = 0; lw < patch_hw; ++lw)
              for (int c = 0; c < clip.C; ++c)
                x(row, col++) = static_cast<double>(
                    clip.at(pt * patch_t + lt, ph * patch_hw + lh,
                            pw * patch_hw + lw, c));
      }
  return x;
}

namespace {

void check_clip_dims(const EncoderParams& p, const Clip& clip) {
  check(clip.T == p.T, "clip T=" + std::to_string(clip.T) + " does not match model T=" +
                           std::to_string(p.T));
  check(clip.H == p.H, "clip H mismatch");
  check(clip.W == p.W, "clip W mismatch");
  check(clip.C == p.C, "clip C mismatch");
}

// Shared forward. `cache` may be null for inference.
Mat forward(const EncoderParams& p, const std::vector<const Clip*>& clips,
            ForwardCache* cache) {
  const int B = static_cast<int>(clips.size());
  check(B >= 1, "encode: empty batch");
  const int n = p.n_tokens();
  const int d = p.d_model;
  const int nh = p.n_heads;
  const int dh = p.d_head();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  if (cache) {
    cache->B = B;
    cache->patches.resize(B);
    cache->blocks.resize(p.n_blocks);
  }

  // Embed patches and lay out token rows: clip b owns rows [b*n, (b+1)*n).
  Mat x(B * n, d);
  for (int b = 0; b < B; ++b) {
    check_clip_dims(p, *clips[b]);
    Mat patches = patchify(*clips[b], p.patch_t, p.patch_hw);
    x.row(b * n) = p.cls_token.transpose();
    x.middleRows(b * n + 1, n - 1) = linear(patches, p.patch_weight, p.patch_bias);
    x.middleRows(b * n, n) += p.pos_embed;
    if (cache) cache->patches[b] = std::move(patches);
  }

  for (int blk_i = 0; blk_i < p.n_blocks; ++blk_i) {
    const BlockParams& blk = p.blocks[blk_i];
    BlockCache local;
    BlockCache& c = cache ? cache->blocks[blk_i] : local;

    c.x_in = x;
    Mat a;
    layer_norm(x, blk.ln1_gamma, blk.ln1_beta, c.ln1_xhat, c.ln1_rstd, a);

    c.q = linear(a, blk.attn.wq, blk.attn.bq);
    c.k = linear(a, blk.attn.wk, blk.attn.bk);
    c.v = linear(a, blk.attn.wv, blk.attn.bv);

    c.attn_cat.resize(B * n, d);
    c.probs.assign(static_cast<size_t>(B) * nh, Mat());
    for (int b = 0; b < B; ++b) {
      for (int h = 0; h < nh; ++h) {
        auto qh = c.q.block(b * n, h * dh, n, dh);
        auto kh = c.k.block(b * n, h * dh, n, dh);
        auto vh = c.v.block(b * n, h * dh, n, dh);
        Mat s = (qh * kh.transpose()) * scale;
        // Row softmax with max subtraction.
        for (int r = 0; r < n; ++r) {
          double mx = s.row(r).maxCoeff();
          Eigen::ArrayXd e = (s.row(r).array() - mx).exp();
          s.row(r) = (e / e.sum()).matrix();
        }
        c.attn_cat.block(b * n, h * dh, n, dh).noalias() = s * vh;
        c.probs[static_cast<size_t>(b) * nh + h] = std::move(s);
      }
    }
    x += linear(c.attn_cat, blk.attn.wo, blk.attn.bo);
    c.x_mid = x;

    Mat a2;
    layer_norm(x, blk.ln2_gamma, blk.ln2_beta, c.ln2_xhat, c.ln2_rstd, a2);
    c.mlp_pre = linear(a2, blk.mlp_w1, blk.mlp_b1);
    c.mlp_act = c.mlp_pre.unaryExpr([](double v) { return gelu(v); });
    x += linear(c.mlp_act, blk.mlp_w2, blk.mlp_b2);

    if (!cache) {
      // Inference keeps nothing.
    }
  }

  if (cache) cache->x_out = x;

  Mat z(B, d);
  for (int b = 0; b < B; ++b) z.row(b) = x.row(b * n);
  return z;
}

}  // namespace

Mat encode_batch(const EncoderParams& p, const std::vector<const Clip*>& clips) {
  return forward(p, clips, nullptr);
}

Mat encode_batch_cached(const EncoderParams& p, const std::vector<const Clip*>& clips,
                        ForwardCache& cache) {
  return forward(p, clips, &cache);
}

void encode_backward(const EncoderParams& p, const ForwardCache& cache,
                     const Mat& grad_z, EncoderParams& grads) {
  const int B = cache.B;
  const int n = p.n_tokens();
  const int d = p.d_model;
  const int nh = p.n_heads;
  const int dh = p.d_head();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  check(grad_z.rows() == B && grad_z.cols() == d, "encode_backward: grad shape");

  // Gradient w.r.t. the final token rows: only class-token rows receive
  // signal from z.
  Mat gx = Mat::Zero(B * n, d);
  for (int b = 0; b < B; ++b) gx.row(b * n) = grad_z.row(b);

  for (int blk_i = p.n_blocks - 1; blk_i >= 0; --blk_i) {
    const BlockParams& blk = p.blocks[blk_i];
    BlockParams& gblk = grads.blocks[blk_i];
    const BlockCache& c = cache.blocks[blk_i];

    // MLP residual: x_out = x_mid + gelu(LN2(x_mid) W1^T + b1) W2^T + b2.
    Mat g_act = linear_backward(c.mlp_act, blk.mlp_w2, gx, gblk.mlp_w2, gblk.mlp_b2);
    Mat g_pre = g_act.cwiseProduct(c.mlp_pre.unaryExpr([](double v) { return gelu_grad(v); }));
    // Recompute LN2's output rather than caching it; it is cheap.
    Mat a2(B * n, d);
    for (Eigen::Index i = 0; i < a2.rows(); ++i)
      a2.row(i) = (c.ln2_xhat.row(i).array() * blk.ln2_gamma.transpose().array() +
                   blk.ln2_beta.transpose().array())
                      .matrix();
    Mat g_a2 = linear_backward(a2, blk.mlp_w1, g_pre, gblk.mlp_w1, gblk.mlp_b1);
    gx += layer_norm_backward(c.ln2_xhat, c.ln2_rstd, blk.ln2_gamma, g_a2,
                              gblk.ln2_gamma, gblk.ln2_beta);

    // Attention residual: x_mid = x_in + (softmax(QK^T) V heads) Wo^T + bo.
    Mat a(B * n, d);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      a.row(i) = (c.ln1_xhat.row(i).array() * blk.ln1_gamma.transpose().array() +
                  blk.ln1_beta.transpose().array())
                     .matrix();
    Mat g_cat = linear_backward(c.attn_cat, blk.attn.wo, gx, gblk.attn.wo, gblk.attn.bo);

    Mat g_q = Mat::Zero(B * n, d);
    Mat g_k = Mat::Zero(B * n, d);
    Mat g_v = Mat::Zero(B * n, d);
    for (int b = 0; b < B; ++b) {
      for (int h = 0; h < nh; ++h) {
        const Mat& probs = c.probs[static_cast<size_t>(b) * nh + h];
        auto qh = c.q.block(b * n, h * dh, n, dh);
        auto kh = c.k.block(b * n, h * dh, n, dh);
        auto vh = c.v.block(b * n, h * dh, n, dh);
        auto g_oh = g_cat.block(b * n, h * dh, n, dh);

        Mat g_probs = g_oh * vh.transpose();
        g_v.block(b * n, h * dh, n, dh).noalias() = probs.transpose() * g_oh;

        // Softmax backward per row: ds = p .* (dp - sum(dp .* p)).
        Mat g_s(n, n);
        for (int r = 0; r < n; ++r) {
          double dot = g_probs.row(r).dot(probs.row(r));
          g_s.row(r) = (probs.row(r).array() * (g_probs.row(r).array() - dot)).matrix();
        }
        g_s *= scale;
        g_q.block(b * n, h * dh, n, dh).noalias() = g_s * kh;
        g_k.block(b * n, h * dh, n, dh).noalias() = g_s.transpose() * qh;
      }
    }

    Mat g_a = linear_backward(a, blk.attn.wq, g_q, gblk.attn.wq, gblk.attn.bq);
    g_a += linear_backward(a, blk.attn.wk, g_k, gblk.attn.wk, gblk.attn.bk);
    g_a += linear_backward(a, blk.attn.wv, g_v, gblk.attn.wv, gblk.attn.bv);
    gx += layer_norm_backward(c.ln1_xhat, c.ln1_rstd, blk.ln1_gamma, g_a,
                              gblk.ln1_gamma, gblk.ln1_beta);
  }

  // Token layout backward: position table, class token, patch embedding.
  for (int b = 0; b < B; ++b) {
    grads.pos_embed += gx.middleRows(b * n, n);
    grads.cls_token += gx.row(b * n).transpose();
    Mat g_embed = gx.middleRows(b * n + 1, n - 1);
    grads.patch_weight.noalias() += g_embed.transpose() * cache.patches[b];
    grads.patch_bias.noalias() += g_embed.colwise().sum().transpose();
  }
}

Vec encode(const EncoderParams& p, const Clip& clip) {
  std::vector<const Clip*> one{&clip};
  return encode_batch(p, one).row(0).transpose();
}

Vec classify(const EncoderParams& p, const Vec& z) {
  return p.cls_weight * z + p.cls_bias;
}

Mat classify_batch(const EncoderParams& p, const Mat& z) {
  return linear(z, p.cls_weight, p.cls_bias);
}

void classify_backward(const EncoderParams& p, const Mat& z, const Mat& grad_logits,
                       EncoderParams& grads, Mat& grad_z_accum) {
  grad_z_accum += linear_backward(z, p.cls_weight, grad_logits, grads.cls_weight,
                                  grads.cls_bias);
}

ProjectResult project_batch(const EncoderParams& p, const Mat& z) {
  ProjectResult r;
  r.hidden = linear(z, p.proj_w1, p.proj_b1);
  Mat act = r.hidden.unaryExpr([](double v) { return gelu(v); });
  r.raw = linear(act, p.proj_w2, p.proj_b2);
  r.proj = l2_normalize_rows(r.raw, &r.zero_fallbacks);
  return r;
}

Vec project(const EncoderParams& p, const Vec& z) {
  return project_batch(p, Mat(z.transpose())).proj.row(0).transpose();
}

void project_backward(const EncoderParams& p, const Mat& z, const ProjectResult& fwd,
                      const Mat& grad_proj, EncoderParams& grads, Mat& grad_z_accum) {
  Mat g_raw = l2_normalize_rows_backward(fwd.raw, grad_proj);
  Mat act = fwd.hidden.unaryExpr([](double v) { return gelu(v); });
  Mat g_act = linear_backward(act, p.proj_w2, g_raw, grads.proj_w2, grads.proj_b2);
  Mat g_hidden =
      g_act.cwiseProduct(fwd.hidden.unaryExpr([](double v) { return gelu_grad(v); }));
  grad_z_accum += linear_backward(z, p.proj_w1, g_hidden, grads.proj_w1, grads.proj_b1);
}

int64_t param_count(const EncoderParams& p) {
  int64_t total = 0;
  for (const auto& ref : param_refs(const_cast<EncoderParams&>(p))) total += ref.size();
  return total;
}

}  // namespace cvda
