// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "cvda/error.hpp"
#include "cvda/eval.hpp"
#include "cvda/io_util.hpp"
#include "cvda/losses.hpp"
#include "cvda/manifest.hpp"
#include "cvda/optim.hpp"
#include "cvda/pairing.hpp"
#include "cvda/rng.hpp"

namespace cvda {

namespace {

std::vector<int> shuffled_indices(size_t n, uint64_t stream) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(stream);
  rng.shuffle(order);
  return order;
}

void check_dims(const EncoderParams& p, const TrainConfig& cfg) {
  const bool ok = p.d_model == cfg.d_model && p.n_blocks == cfg.n_blocks &&
                  p.n_heads == cfg.n_heads && p.patch_t == cfg.patch_t &&
                  p.patch_hw == cfg.patch_hw && p.d_proj == cfg.d_proj &&
                  p.K == cfg.K && p.T == cfg.T && p.H == cfg.H &&
                  p.W == cfg.W && p.C == cfg.C;
  if (!ok) throw Error("checkpoint dims disagree with the config");
}

// Replays the endless shuffled target stream: reshuffles with the same rng
// whenever the pool is exhausted, so draws are deterministic across the
// whole phase regardless of epoch boundaries.
class TargetCycle {
 public:
  TargetCycle(size_t n, uint64_t stream) : rng_(stream), order_(n) {
    std::iota(order_.begin(), order_.end(), 0);
    rng_.shuffle(order_);
  }
  int next() {
    if (cursor_ == order_.size()) {
      rng_.shuffle(order_);
      cursor_ = 0;
    }
    return order_[cursor_++];
  }

 private:
  Rng rng_;
  std::vector<int> order_;
  size_t cursor_ = 0;
};

void maybe_snapshot_best(PhaseResult& res, const EncoderParams& params,
                         int epoch, double val_top1, bool& have_best) {
  if (!have_best || val_top1 > res.best_val_top1) {
    res.best_params = params;
    res.best_epoch = epoch;
    res.best_val_top1 = val_top1;
    have_best = true;
  }
}

std::string bool01(bool b) { return b ? "1" : "0"; }

}  // namespace

Phase1Data make_phase1_data(const Corpus& corpus,
                            const std::vector<SyncGroup>& groups,
                            const SplitAssignment& splits) {
  Phase1Data data;
  data.corpus = &corpus;
  for (const SyncGroup& g : groups) {
    auto it = splits.by_group.find(g.group_id);
    if (it == splits.by_group.end())
      throw Error("group " + g.group_id + " has no split assignment");
    if (it->second == Split::train) {
      data.train_groups.push_back(g);
    } else if (it->second == Split::val) {
      data.val_records.push_back(g.anchor_idx);
    }
  }
  return data;
}

Phase2Data make_phase2_data(const Corpus& corpus,
                            const std::vector<SyncGroup>& groups,
                            const SplitAssignment& splits) {
  Phase2Data data;
  data.corpus = &corpus;
  for (const SyncGroup& g : groups) {
    auto it = splits.by_group.find(g.group_id);
    if (it == splits.by_group.end())
      throw Error("group " + g.group_id + " has no split assignment");
    if (it->second == Split::train) {
      data.source_records.push_back(g.anchor_idx);
    } else if (it->second == Split::val) {
      data.val_records.push_back(g.anchor_idx);
    }
  }
  for (size_t i = 0; i < corpus.manifest.records.size(); ++i) {
    if (corpus.manifest.records[i].modality != kModTarget) continue;
    Clip clip = corpus.clips[i];  // detached copy, label erased below
    clip.class_id = kNoLabel;
    data.target_clips.push_back(std::move(clip));
  }
  return data;
}

PhaseResult train_phase1(const Phase1Data& data, const TrainConfig& cfg) {
  require_valid(cfg);
  if (data.corpus == nullptr) throw Error("phase 1: no corpus");
  if (data.train_groups.empty()) throw Error("phase 1: empty sync-group pool");

  EncoderParams params = make_encoder(cfg);
  {
    Rng init_rng(derive_stream(cfg.seed, "init"));
    init_encoder(params, init_rng);
  }
  EncoderParams grads = make_encoder(cfg);
  const std::vector<ParamRef> wset = param_refs(params);
  const std::vector<ParamRef> gset = param_refs(grads);
  AdamConfig acfg;
  acfg.weight_decay = cfg.weight_decay;
  Adam opt(wset, acfg);

  const Corpus& corpus = *data.corpus;
  PhaseResult res;
  bool have_best = false;
  int64_t gstep = 0;

  for (int epoch = 0; epoch < cfg.epochs_phase1; ++epoch) {
    const double lr = cosine_lr(cfg.lr_phase1, epoch, cfg.epochs_phase1);
    const std::vector<int> order = shuffled_indices(
        data.train_groups.size(), derive_stream(cfg.seed, "phase1/order", epoch));
    Rng view_rng(derive_stream(cfg.seed, "phase1/views", epoch));

    for (size_t base = 0; base < order.size(); base += cfg.batch_phase1) {
      const size_t hi =
          std::min(order.size(), base + static_cast<size_t>(cfg.batch_phase1));
      const int B = static_cast<int>(hi - base);

      std::vector<const Clip*> clips;
      std::vector<int> labels;
      // (anchor batch row, projection source) for non-singleton groups; the
      // positive clips append after all anchors.
      std::vector<std::pair<int, int>> pair_rows;  // (anchor row, positive row)
      std::vector<int> pos_choice;
      for (size_t i = base; i < hi; ++i) {
        const SyncGroup& g = data.train_groups[static_cast<size_t>(order[i])];
        clips.push_back(&corpus.clips[static_cast<size_t>(g.anchor_idx)]);
        labels.push_back(g.class_id);
      }
      for (size_t i = base; i < hi; ++i) {
        const SyncGroup& g = data.train_groups[static_cast<size_t>(order[i])];
        if (g.singleton) continue;
        const int pick = static_cast<int>(view_rng.index(g.positive_idx.size()));
        pair_rows.emplace_back(static_cast<int>(i - base),
                               static_cast<int>(clips.size()));
        clips.push_back(
            &corpus.clips[static_cast<size_t>(g.positive_idx[static_cast<size_t>(pick)])]);
        pos_choice.push_back(pick);
      }
      const int Bp = static_cast<int>(pair_rows.size());

      ForwardCache cache;
      const Mat z = encode_batch_cached(params, clips, cache);
      zero_params(grads);
      Mat grad_z = Mat::Zero(z.rows(), z.cols());

      const Mat z_anchor = z.topRows(B);
      const Mat logits = classify_batch(params, z_anchor);
      const CrossEntropyResult ce = cross_entropy(logits, labels);
      {
        Mat grad_z_anchor = Mat::Zero(B, z.cols());
        classify_backward(params, z_anchor, ce.grad, grads, grad_z_anchor);
        grad_z.topRows(B) += grad_z_anchor;
      }

      double cl_value = 0.0;
      if (Bp > 0) {
        Mat zc(2 * Bp, z.cols());
        std::vector<int> dup_labels(static_cast<size_t>(2 * Bp));
        for (int j = 0; j < Bp; ++j) {
          zc.row(j) = z.row(pair_rows[static_cast<size_t>(j)].first);
          zc.row(Bp + j) = z.row(pair_rows[static_cast<size_t>(j)].second);
          const int y = labels[static_cast<size_t>(pair_rows[static_cast<size_t>(j)].first)];
          dup_labels[static_cast<size_t>(j)] = y;
          dup_labels[static_cast<size_t>(Bp + j)] = y;
        }
        const ProjectResult pr = project_batch(params, zc);
        const SupConResult sc = supcon_loss(pr.proj, dup_labels, cfg.tau);
        cl_value = sc.value;
        const Mat gproj = cfg.lambda1 * sc.grad;
        Mat grad_zc = Mat::Zero(2 * Bp, z.cols());
        project_backward(params, zc, pr, gproj, grads, grad_zc);
        for (int j = 0; j < Bp; ++j) {
          grad_z.row(pair_rows[static_cast<size_t>(j)].first) += grad_zc.row(j);
          grad_z.row(pair_rows[static_cast<size_t>(j)].second) += grad_zc.row(Bp + j);
        }
      }

      encode_backward(params, cache, grad_z, grads);
      opt.step(wset, gset, lr);

      StepRecord rec;
      rec.phase = 1;
      rec.step = gstep++;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.ce = ce.value;
      rec.aux = cl_value;
      rec.total = phase1_total(ce.value, cl_value, cfg.lambda1).value;
      rec.aux_applied = Bp > 0;
      res.steps.push_back(rec);
    }

    const double val_top1 =
        data.val_records.empty()
            ? 0.0
            : top1_on_records(params, corpus, data.val_records);
    res.epochs.push_back({epoch, lr, val_top1});
    maybe_snapshot_best(res, params, epoch, val_top1, have_best);
  }

  res.final_params = std::move(params);
  return res;
}

PhaseResult train_phase2(const EncoderParams& start, const Phase2Data& data,
                         const TrainConfig& cfg) {
  require_valid(cfg);
  check_dims(start, cfg);
  if (data.corpus == nullptr) throw Error("phase 2: no corpus");
  if (data.source_records.empty()) throw Error("phase 2: empty source pool");
  if (data.target_clips.empty()) throw Error("phase 2: empty target pool");

  EncoderParams params = start;
  EncoderParams grads = make_encoder(cfg);
  const FreezeMask mask = make_freeze_mask(cfg.freeze_fraction, cfg.n_blocks);
  const std::vector<ParamRef> wtrain = trainable_params(params, mask);
  const std::vector<ParamRef> gtrain = trainable_params(grads, mask);
  AdamConfig acfg;
  acfg.weight_decay = cfg.weight_decay;
  Adam opt(wtrain, acfg);

  const Corpus& corpus = *data.corpus;
  PairQueueSet queues(cfg.K, cfg.queue_capacity);
  TargetCycle targets(data.target_clips.size(),
                      derive_stream(cfg.seed, "phase2/targets"));

  PhaseResult res;
  bool have_best = false;
  int64_t gstep = 0;

  for (int epoch = 0; epoch < cfg.epochs_phase2; ++epoch) {
    const double lr = cosine_lr(cfg.lr_phase2, epoch, cfg.epochs_phase2);
    const std::vector<int> order =
        shuffled_indices(data.source_records.size(),
                         derive_stream(cfg.seed, "phase2/order", epoch));

    for (size_t base = 0; base < order.size(); base += cfg.batch_phase2) {
      const size_t hi =
          std::min(order.size(), base + static_cast<size_t>(cfg.batch_phase2));
      const int Bs = static_cast<int>(hi - base);
      const int Bt = cfg.batch_phase2;

      std::vector<const Clip*> clips;
      std::vector<int> labels;
      for (size_t i = base; i < hi; ++i) {
        const int rec_idx = data.source_records[static_cast<size_t>(order[i])];
        clips.push_back(&corpus.clips[static_cast<size_t>(rec_idx)]);
        labels.push_back(
            corpus.manifest.records[static_cast<size_t>(rec_idx)].class_id);
      }
      for (int i = 0; i < Bt; ++i)
        clips.push_back(&data.target_clips[static_cast<size_t>(targets.next())]);

      ForwardCache cache;
      const Mat z = encode_batch_cached(params, clips, cache);
      zero_params(grads);
      Mat grad_z = Mat::Zero(z.rows(), z.cols());

      const Mat z_source = z.topRows(Bs);
      const Mat z_target = z.bottomRows(Bt);
      const Mat logits_s = classify_batch(params, z_source);
      const CrossEntropyResult ce = cross_entropy(logits_s, labels);
      {
        Mat grad_z_source = Mat::Zero(Bs, z.cols());
        classify_backward(params, z_source, ce.grad, grads, grad_z_source);
        grad_z.topRows(Bs) += grad_z_source;
      }

      // Pseudo-labeling and pairing read embeddings and logits as plain
      // values; no gradient flows through either decision.
      const Mat logits_t = classify_batch(params, z_target);
      const PseudoLabelResult pseudo =
          pseudo_label(logits_t, cfg.pseudo_conf_threshold);
      queues.update(z_source, labels, gstep);
      const PairBatch pb = build_pairs(z_target, pseudo.accepted, z_source,
                                       labels, queues, cfg.pairs_per_target);

      double ib_value = 0.0;
      if (pb.sufficient()) {
        const IbResult ib = ib_loss(pb.source, pb.target, cfg.lambda_offdiag);
        ib_value = ib.value;
        for (int i = 0; i < pb.size(); ++i) {
          if (pb.source_row[static_cast<size_t>(i)] >= 0)
            grad_z.row(pb.source_row[static_cast<size_t>(i)]) +=
                cfg.alpha * ib.grad_source.row(i);
          grad_z.row(Bs + pb.target_row[static_cast<size_t>(i)]) +=
              cfg.alpha * ib.grad_target.row(i);
        }
      }

      encode_backward(params, cache, grad_z, grads);
      opt.step(wtrain, gtrain, lr);

      StepRecord rec;
      rec.phase = 2;
      rec.step = gstep++;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.ce = ce.value;
      rec.aux = ib_value;
      rec.total = phase2_total(ce.value, ib_value, cfg.alpha).value;
      rec.aux_applied = pb.sufficient();
      rec.accepted = static_cast<int>(pseudo.accepted.size());
      rec.rejected = pseudo.n_rejected;
      rec.pairs = pb.size();
      rec.in_batch = pb.n_in_batch;
      rec.from_queue = pb.n_from_queue;
      rec.skipped_targets = pb.n_skipped_targets;
      res.steps.push_back(rec);
    }

    const double val_top1 =
        data.val_records.empty()
            ? 0.0
            : top1_on_records(params, corpus, data.val_records);
    res.epochs.push_back({epoch, lr, val_top1});
    maybe_snapshot_best(res, params, epoch, val_top1, have_best);
  }

  res.final_params = std::move(params);
  return res;
}

std::string baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::finetune_only: return "finetune_only";
    case BaselineKind::finetune_contrastive: return "finetune_contrastive";
    case BaselineKind::uda_only: return "uda_only";
    case BaselineKind::full_method: return "full_method";
  }
  throw Error("unknown baseline kind");
}

BaselineKind parse_baseline_kind(const std::string& s) {
  if (s == "finetune_only") return BaselineKind::finetune_only;
  if (s == "finetune_contrastive") return BaselineKind::finetune_contrastive;
  if (s == "uda_only") return BaselineKind::uda_only;
  if (s == "full_method") return BaselineKind::full_method;
  throw Error("unknown baseline kind: " + s);
}

BaselineRun run_baseline(BaselineKind kind, const Corpus& corpus,
                         const std::vector<SyncGroup>& groups,
                         const SplitAssignment& splits, const TrainConfig& cfg) {
  const Phase1Data d1 = make_phase1_data(corpus, groups, splits);
  TrainConfig cfg1 = cfg;
  if (kind == BaselineKind::finetune_only || kind == BaselineKind::uda_only)
    cfg1.lambda1 = 0.0;

  BaselineRun run;
  run.kind = kind;
  run.phase1 = train_phase1(d1, cfg1);
  if (kind == BaselineKind::uda_only || kind == BaselineKind::full_method) {
    const Phase2Data d2 = make_phase2_data(corpus, groups, splits);
    run.phase2 = train_phase2(run.phase1.best_params, d2, cfg);
    run.final_params = run.phase2->final_params;
  } else {
    run.final_params = run.phase1.best_params;
  }
  return run;
}

std::vector<BaselineRun> run_all_baselines(const Corpus& corpus,
                                           const std::vector<SyncGroup>& groups,
                                           const SplitAssignment& splits,
                                           const TrainConfig& cfg) {
  const Phase1Data d1 = make_phase1_data(corpus, groups, splits);
  const Phase2Data d2 = make_phase2_data(corpus, groups, splits);
  TrainConfig cfg_plain = cfg;
  cfg_plain.lambda1 = 0.0;

  PhaseResult p1_plain = train_phase1(d1, cfg_plain);
  PhaseResult p1_con = train_phase1(d1, cfg);
  PhaseResult p2_uda = train_phase2(p1_plain.best_params, d2, cfg);
  PhaseResult p2_full = train_phase2(p1_con.best_params, d2, cfg);

  std::vector<BaselineRun> runs(4);
  runs[0].kind = BaselineKind::finetune_only;
  runs[0].phase1 = p1_plain;
  runs[0].final_params = p1_plain.best_params;
  runs[1].kind = BaselineKind::finetune_contrastive;
  runs[1].phase1 = p1_con;
  runs[1].final_params = p1_con.best_params;
  runs[2].kind = BaselineKind::uda_only;
  runs[2].phase1 = std::move(p1_plain);
  runs[2].phase2 = std::move(p2_uda);
  runs[2].final_params = runs[2].phase2->final_params;
  runs[3].kind = BaselineKind::full_method;
  runs[3].phase1 = std::move(p1_con);
  runs[3].phase2 = std::move(p2_full);
  runs[3].final_params = runs[3].phase2->final_params;
  return runs;
}

void write_step_metrics(const std::filesystem::path& path,
                        const std::vector<StepRecord>& steps) {
  std::string out =
      "phase\tstep\tepoch\tlr\tce\taux\ttotal\taux_applied\taccepted\t"
      "rejected\tpairs\tin_batch\tfrom_queue\tskipped_targets\n";
  for (const StepRecord& s : steps) {
    out += std::to_string(s.phase) + "\t" + std::to_string(s.step) + "\t" +
           std::to_string(s.epoch) + "\t" + fmt_double(s.lr) + "\t" +
           fmt_double(s.ce) + "\t" + fmt_double(s.aux) + "\t" +
           fmt_double(s.total) + "\t" + bool01(s.aux_applied) + "\t" +
           std::to_string(s.accepted) + "\t" + std::to_string(s.rejected) +
           "\t" + std::to_string(s.pairs) + "\t" + std::to_string(s.in_batch) +
           "\t" + std::to_string(s.from_queue) + "\t" +
           std::to_string(s.skipped_targets) + "\n";
  }
  write_text_file(path, out);
}

void write_epoch_metrics(const std::filesystem::path& path,
                         const std::vector<EpochRecord>& epochs) {
  std::string out = "epoch\tlr\tval_top1\n";
  for (const EpochRecord& e : epochs) {
    out += std::to_string(e.epoch) + "\t" + fmt_double(e.lr) + "\t" +
           fmt_double(e.val_top1) + "\n";
  }
  write_text_file(path, out);
}

}  // namespace cvda
