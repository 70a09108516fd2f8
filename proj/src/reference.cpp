// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/reference.hpp"

#include <algorithm>
#include <cmath>

#include "cvda/error.hpp"

namespace cvda::ref {

std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double denom = 0.0;
  for (size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(logits[j] - mx);
    denom += p[j];
  }
  for (double& v : p) v /= denom;
  return p;
}

double cross_entropy(const Rows& logits, const std::vector<int>& labels) {
  check(!logits.empty() && logits.size() == labels.size(), "ref ce: shape mismatch");
  double total = 0.0;
  for (size_t n = 0; n < logits.size(); ++n) {
    std::vector<double> p = softmax(logits[n]);
    total += -std::log(p[labels[n]]);
  }
  return total / static_cast<double>(logits.size());
}

double supcon(const Rows& proj, const std::vector<int>& labels, double tau) {
  check(proj.size() == labels.size(), "ref supcon: shape mismatch");
  const size_t m = proj.size();
  double outer_sum = 0.0;
  size_t anchors_used = 0;

  for (size_t i = 0; i < m; ++i) {
    size_t n_pos = 0;
    for (size_t p = 0; p < m; ++p)
      if (p != i && labels[p] == labels[i]) ++n_pos;
    if (n_pos == 0) continue;

    double denom = 0.0;
    for (size_t k = 0; k < m; ++k) {
      if (k == i) continue;
      double dot = 0.0;
      for (size_t c = 0; c < proj[i].size(); ++c) dot += proj[i][c] * proj[k][c];
      denom += std::exp(dot / tau);
    }

    double inner = 0.0;
    for (size_t p = 0; p < m; ++p) {
      if (p == i || labels[p] != labels[i]) continue;
      double dot = 0.0;
      for (size_t c = 0; c < proj[i].size(); ++c) dot += proj[i][c] * proj[p][c];
      inner += -std::log(std::exp(dot / tau) / denom);
    }
    outer_sum += inner / static_cast<double>(n_pos);
    ++anchors_used;
  }
  check(anchors_used > 0, "ref supcon: no positive pairs");
  return outer_sum / static_cast<double>(anchors_used);
}

namespace {

Rows standardize_columns(const Rows& x) {
  const size_t n = x.size();
  const size_t d = x[0].size();
  Rows out(n, std::vector<double>(d, 0.0));
  for (size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += x[i][j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) var += (x[i][j] - mean) * (x[i][j] - mean);
    var /= static_cast<double>(n);
    double sd = std::sqrt(var);
    if (sd < 1e-8) sd = 1e-8;
    for (size_t i = 0; i < n; ++i) out[i][j] = (x[i][j] - mean) / sd;
  }
  return out;
}

}  // namespace

Rows ib_correlation(const Rows& source, const Rows& target) {
  check(source.size() == target.size() && source.size() >= 2, "ref ib: need >= 2 pairs");
  const size_t n = source.size();
  const size_t d = source[0].size();
  Rows s = standardize_columns(source);
  Rows t = standardize_columns(target);
  Rows c(d, std::vector<double>(d, 0.0));
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (size_t row = 0; row < n; ++row) acc += s[row][i] * t[row][j];
      c[i][j] = acc / static_cast<double>(n);
    }
  return c;
}

double ib(const Rows& source, const Rows& target, double lambda_offdiag) {
  Rows c = ib_correlation(source, target);
  const size_t d = c.size();
  double loss = 0.0;
  for (size_t i = 0; i < d; ++i) loss += (1.0 - c[i][i]) * (1.0 - c[i][i]);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j)
      if (i != j) loss += lambda_offdiag * c[i][j] * c[i][j];
  return loss;
}

bool topk_hit(const std::vector<double>& logits, int label, int k) {
  // Rank of `label`: number of classes that come strictly before it under
  // (logit desc, index asc).
  int rank = 0;
  for (size_t j = 0; j < logits.size(); ++j) {
    if (static_cast<int>(j) == label) continue;
    bool before = logits[j] > logits[label] ||
                  (logits[j] == logits[label] && static_cast<int>(j) < label);
    if (before) ++rank;
  }
  return rank < k;
}

double topk_accuracy(const Rows& logits, const std::vector<int>& labels, int k) {
  check(!logits.empty() && logits.size() == labels.size(), "ref topk: shape mismatch");
  size_t hits = 0;
  for (size_t n = 0; n < logits.size(); ++n)
    if (topk_hit(logits[n], labels[n], k)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(logits.size());
}

std::vector<PseudoLabel> pseudo_labels(const Rows& logits, double threshold) {
  std::vector<PseudoLabel> out;
  for (size_t n = 0; n < logits.size(); ++n) {
    std::vector<double> p = softmax(logits[n]);
    int best = 0;
    for (size_t j = 1; j < p.size(); ++j)
      if (p[j] > p[best]) best = static_cast<int>(j);
    if (p[best] >= threshold)
      out.push_back({static_cast<int>(n), best, p[best]});
  }
  return out;
}

std::vector<SyncGroup> brute_force_sync_groups(const Manifest& manifest,
                                               int min_overlap_frames) {
  const int n_views = manifest.n_views;
  std::vector<SyncGroup> groups;

  for (size_t a = 0; a < manifest.records.size(); ++a) {
    const SampleRecord& anchor = manifest.records[a];
    if (anchor.view != 1 || anchor.modality != kModSource) continue;

    SyncGroup g;
    g.anchor_idx = static_cast<int>(a);
    g.class_id = anchor.class_id;
    g.overlap_start = anchor.start_frame;
    g.overlap_end = anchor.end_frame;
    g.group_id = group_key(anchor.class_id, anchor.start_frame, anchor.end_frame);

    bool all_views_matched = true;
    for (int v = 2; v <= n_views; ++v) {
      if (view_role(v, n_views) != ViewRole::positive) continue;

      int best = -1;
      int64_t best_overlap = 0;
      for (size_t b = 0; b < manifest.records.size(); ++b) {
        const SampleRecord& cand = manifest.records[b];
        if (cand.view != v || cand.modality != kModSource) continue;
        check(cand.class_id != kNoLabel, "positive-view record without a label");
        if (cand.class_id != anchor.class_id) continue;
        int64_t lo = std::max(anchor.start_frame, cand.start_frame);
        int64_t hi = std::min(anchor.end_frame, cand.end_frame);
        int64_t overlap = hi - lo;
        if (overlap < min_overlap_frames) continue;
        if (best < 0) {
          best = static_cast<int>(b);
          best_overlap = overlap;
          continue;
        }
        const SampleRecord& prev = manifest.records[best];
        bool wins = overlap > best_overlap ||
                    (overlap == best_overlap && cand.start_frame < prev.start_frame) ||
                    (overlap == best_overlap && cand.start_frame == prev.start_frame &&
                     cand.clip_ref < prev.clip_ref);
        if (wins) {
          best = static_cast<int>(b);
          best_overlap = overlap;
        }
      }

      if (best < 0) {
        all_views_matched = false;
      } else {
        g.positive_idx.push_back(best);
        const SampleRecord& chosen = manifest.records[best];
        g.overlap_start = std::max(g.overlap_start, chosen.start_frame);
        g.overlap_end = std::min(g.overlap_end, chosen.end_frame);
      }
    }

    // An anchor missing a match in ANY positive view is a flagged singleton;
    // it keeps no partial positive list.
    if (!all_views_matched) {
      g.positive_idx.clear();
      g.singleton = true;
      g.overlap_start = anchor.start_frame;
      g.overlap_end = anchor.end_frame;
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

namespace {

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

std::vector<double> layer_norm_row(const std::vector<double>& row, const Vec& gamma,
                                   const Vec& beta) {
  const int d = static_cast<int>(row.size());
  double mean = 0.0;
  for (double v : row) mean += v;
  mean /= d;
  double var = 0.0;
  for (double v : row) var += (v - mean) * (v - mean);
  var /= d;
  double r = 1.0 / std::sqrt(var + 1e-5);
  std::vector<double> out(d);
  for (int j = 0; j < d; ++j) out[j] = (row[j] - mean) * r * gamma(j) + beta(j);
  return out;
}

}  // namespace

std::vector<double> encode_clip(const EncoderParams& p, const Clip& clip) {
  check(clip.T == p.T && clip.H == p.H && clip.W == p.W && clip.C == p.C,
        "reference encoder: clip dims disagree with parameters");
  const int d = p.d_model;
  const int nt = clip.T / p.patch_t;
  const int nhp = clip.H / p.patch_hw;
  const int nwp = clip.W / p.patch_hw;
  const int n = nt * nhp * nwp + 1;
  const int vol = p.patch_t * p.patch_hw * p.patch_hw * clip.C;
  const int heads = p.n_heads;
  const int dh = d / heads;

  Rows x(n, std::vector<double>(d, 0.0));
  for (int j = 0; j < d; ++j) x[0][j] = p.cls_token(j) + p.pos_embed(0, j);
  for (int pt = 0; pt < nt; ++pt)
    for (int ph = 0; ph < nhp; ++ph)
      for (int pw = 0; pw < nwp; ++pw) {
        int row = (pt * nhp + ph) * nwp + pw;
        std::vector<double> patch(vol);
        int col = 0;
        for (int lt = 0; lt < p.patch_t; ++lt)
          for (int lh = 0; lh < p.patch_hw; ++lh)
            for (int lw = 0; lw < p.patch_hw; ++lw)
              for (int c = 0; c < clip.C; ++c)
                patch[col++] = static_cast<double>(
                    clip.at(pt * p.patch_t + lt, ph * p.patch_hw + lh,
                            pw * p.patch_hw + lw, c));
        for (int j = 0; j < d; ++j) {
          double acc = p.patch_bias(j);
          for (int m = 0; m < vol; ++m) acc += p.patch_weight(j, m) * patch[m];
          x[row + 1][j] = acc + p.pos_embed(row + 1, j);
        }
      }

  for (const BlockParams& blk : p.blocks) {
    Rows a(n), q(n, std::vector<double>(d)), k(n, std::vector<double>(d)),
        v(n, std::vector<double>(d));
    for (int r = 0; r < n; ++r) a[r] = layer_norm_row(x[r], blk.ln1_gamma, blk.ln1_beta);
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < d; ++j) {
        double aq = blk.attn.bq(j), ak = blk.attn.bk(j), av = blk.attn.bv(j);
        for (int m = 0; m < d; ++m) {
          aq += blk.attn.wq(j, m) * a[r][m];
          ak += blk.attn.wk(j, m) * a[r][m];
          av += blk.attn.wv(j, m) * a[r][m];
        }
        q[r][j] = aq;
        k[r][j] = ak;
        v[r][j] = av;
      }

    Rows cat(n, std::vector<double>(d, 0.0));
    for (int h = 0; h < heads; ++h)
      for (int r = 0; r < n; ++r) {
        std::vector<double> scores(n);
        for (int c2 = 0; c2 < n; ++c2) {
          double acc = 0.0;
          for (int j = 0; j < dh; ++j) acc += q[r][h * dh + j] * k[c2][h * dh + j];
          scores[c2] = acc / std::sqrt(static_cast<double>(dh));
        }
        std::vector<double> probs = softmax(scores);
        for (int j = 0; j < dh; ++j) {
          double acc = 0.0;
          for (int c2 = 0; c2 < n; ++c2) acc += probs[c2] * v[c2][h * dh + j];
          cat[r][h * dh + j] = acc;
        }
      }
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < d; ++j) {
        double acc = blk.attn.bo(j);
        for (int m = 0; m < d; ++m) acc += blk.attn.wo(j, m) * cat[r][m];
        x[r][j] += acc;
      }

    const int hid = p.d_hidden();
    for (int r = 0; r < n; ++r) {
      std::vector<double> a2 = layer_norm_row(x[r], blk.ln2_gamma, blk.ln2_beta);
      std::vector<double> act(hid);
      for (int j = 0; j < hid; ++j) {
        double acc = blk.mlp_b1(j);
        for (int m = 0; m < d; ++m) acc += blk.mlp_w1(j, m) * a2[m];
        act[j] = gelu_scalar(acc);
      }
      for (int j = 0; j < d; ++j) {
        double acc = blk.mlp_b2(j);
        for (int m = 0; m < hid; ++m) acc += blk.mlp_w2(j, m) * act[m];
        x[r][j] += acc;
      }
    }
  }
  return x[0];
}

std::vector<double> classify_embedding(const EncoderParams& p,
                                       const std::vector<double>& z) {
  std::vector<double> logits(p.K);
  for (int k = 0; k < p.K; ++k) {
    double acc = p.cls_bias(k);
    for (int j = 0; j < p.d_model; ++j) acc += p.cls_weight(k, j) * z[j];
    logits[k] = acc;
  }
  return logits;
}

std::vector<double> project_embedding(const EncoderParams& p,
                                      const std::vector<double>& z) {
  const int d = p.d_model;
  std::vector<double> act(d);
  for (int j = 0; j < d; ++j) {
    double acc = p.proj_b1(j);
    for (int m = 0; m < d; ++m) acc += p.proj_w1(j, m) * z[m];
    act[j] = gelu_scalar(acc);
  }
  std::vector<double> raw(p.d_proj);
  double norm_sq = 0.0;
  for (int j = 0; j < p.d_proj; ++j) {
    double acc = p.proj_b2(j);
    for (int m = 0; m < d; ++m) acc += p.proj_w2(j, m) * act[m];
    raw[j] = acc;
    norm_sq += acc * acc;
  }
  double norm = std::sqrt(norm_sq);
  std::vector<double> out(p.d_proj, 0.0);
  if (norm < 1e-12) {
    out[0] = 1.0;  // degenerate row falls back to the first basis vector
  } else {
    for (int j = 0; j < p.d_proj; ++j) out[j] = raw[j] / norm;
  }
  return out;
}

}  // namespace cvda::ref
