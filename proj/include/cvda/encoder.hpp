// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "cvda/config.hpp"
#include "cvda/rng.hpp"
#include "cvda/tensor.hpp"
#include "cvda/types.hpp"

namespace cvda {

// A small joint space-time transformer over non-overlapping clip patches.
//
// Forward shape story, per clip:
//   T x H x W x C  ->  P patches of volume patch_t*patch_hw^2*C
//                  ->  linear embed to d_model, prepend a class token,
//                      add learned positions (row 0 is the class token's)
//                  ->  n_blocks of pre-norm attention + MLP residual blocks
//                      over the single flattened token sequence
//                  ->  the class-token row is the clip embedding z.
//
// Everything is double precision. Batches fuse all clips' token rows into
// one tall matrix so the linear algebra runs as large GEMMs; attention is
// sliced back per clip since tokens never attend across clips.

struct AttnParams {
  Mat wq, wk, wv, wo;  // d_model x d_model, row-major "out x in"
  Vec bq, bk, bv, bo;
};

struct BlockParams {
  Vec ln1_gamma, ln1_beta;
  AttnParams attn;
  Vec ln2_gamma, ln2_beta;
  Mat mlp_w1;  // d_hidden x d_model
  Vec mlp_b1;
  Mat mlp_w2;  // d_model x d_hidden
  Vec mlp_b2;
};

struct EncoderParams {
  // Shape bookkeeping (mirrors the TrainConfig it was built from).
  int d_model = 0, n_blocks = 0, n_heads = 0, patch_t = 0, patch_hw = 0;
  int d_proj = 0, K = 0;
  int T = 0, H = 0, W = 0, C = 0;

  Mat patch_weight;  // d_model x patch_vol
  Vec patch_bias;
  Mat pos_embed;     // n_tokens x d_model
  Vec cls_token;
  std::vector<BlockParams> blocks;
  Mat cls_weight;    // K x d_model
  Vec cls_bias;
  Mat proj_w1;       // d_model x d_model
  Vec proj_b1;
  Mat proj_w2;       // d_proj x d_model
  Vec proj_b2;

  int n_patches() const;
  int n_tokens() const { return n_patches() + 1; }
  int patch_vol() const { return patch_t * patch_hw * patch_hw * C; }
  int d_head() const { return d_model / n_heads; }
  int d_hidden() const { return 4 * d_model; }
};

// Allocates zeroed parameters shaped by cfg (also the gradient container).
EncoderParams make_encoder(const TrainConfig& cfg);

// Truncated-normal(0.02) weights and position table, zero biases, zero
// class token, unit LayerNorm gains. Consumes `rng` in registry order.
void init_encoder(EncoderParams& p, Rng& rng);

void zero_params(EncoderParams& p);

// Flat view of every parameter tensor, in a fixed registry order. The same
// order drives init, checkpoints, the optimizer, and gradient flattening.
struct ParamRef {
  std::string name;
  double* data;
  Eigen::Index rows, cols;  // cols == 1 for vectors
  int block_index;          // 0-based block, or -1 outside the trunk blocks
  bool is_stem;             // patch embedding or position table
  bool is_weight;           // truncated-normal init (vs zeros/ones)
  bool is_ln_gain;          // ones init

  Eigen::Index size() const { return rows * cols; }
};
std::vector<ParamRef> param_refs(EncoderParams& p);

// Phase-2 freezing policy: the stem plus the first `frozen_blocks` trunk
// blocks hold still; the classifier, projector, and class token never
// freeze. frozen_blocks = floor(freeze_fraction * n_blocks).
struct FreezeMask {
  bool freeze_stem = false;
  int frozen_blocks = 0;
};
FreezeMask make_freeze_mask(double freeze_fraction, int n_blocks);
bool is_frozen(const ParamRef& ref, const FreezeMask& mask);

// The optimizer's working set under a mask. Throws if the mask names more
// blocks than the model has.
std::vector<ParamRef> trainable_params(EncoderParams& p, const FreezeMask& mask);

// One clip's patch matrix (P x patch_vol), promoted to double.
Mat patchify(const Clip& clip, int patch_t, int patch_hw);

// Forward pass for a batch; returns the B x d_model embedding matrix.
// Throws on any clip whose dims disagree with the parameters.
Mat encode_batch(const EncoderParams& p, const std::vector<const Clip*>& clips);

// Forward with cached intermediates for one backward pass.
struct BlockCache {
  Mat x_in, ln1_xhat, q, k, v, attn_cat, x_mid, ln2_xhat, mlp_pre, mlp_act;
  Vec ln1_rstd, ln2_rstd;
  std::vector<Mat> probs;  // [clip * n_heads + head], each n_tokens^2
};
struct ForwardCache {
  int B = 0;
  std::vector<Mat> patches;  // per clip
  std::vector<BlockCache> blocks;
  Mat x_out;  // final token rows
};
Mat encode_batch_cached(const EncoderParams& p, const std::vector<const Clip*>& clips,
                        ForwardCache& cache);

// Accumulates parameter gradients for dLoss/dZ into `grads` (a zeroed or
// partially accumulated container from make_encoder).
void encode_backward(const EncoderParams& p, const ForwardCache& cache,
                     const Mat& grad_z, EncoderParams& grads);

// Single-clip convenience used by evaluation and the verification suite.
Vec encode(const EncoderParams& p, const Clip& clip);

// Affine classifier head; losses own the softmax.
Vec classify(const EncoderParams& p, const Vec& z);
Mat classify_batch(const EncoderParams& p, const Mat& z);
void classify_backward(const EncoderParams& p, const Mat& z, const Mat& grad_logits,
                       EncoderParams& grads, Mat& grad_z_accum);

// Projection head: one hidden nonlinearity, then L2 normalization to the
// unit sphere. Rows that reach normalization with ~zero norm fall back to
// the first basis vector and are counted.
struct ProjectResult {
  Mat proj;    // B x d_proj, unit rows
  Mat raw;     // pre-normalization
  Mat hidden;  // pre-activation hidden layer (kept for backward)
  int zero_fallbacks = 0;
};
ProjectResult project_batch(const EncoderParams& p, const Mat& z);
Vec project(const EncoderParams& p, const Vec& z);
void project_backward(const EncoderParams& p, const Mat& z, const ProjectResult& fwd,
                      const Mat& grad_proj, EncoderParams& grads, Mat& grad_z_accum);

// Total number of scalar parameters (reported by the CLI and checkpoints).
int64_t param_count(const EncoderParams& p);

}  // namespace cvda
