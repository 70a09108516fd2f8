// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
//
// Release gate for the whole artifact: seven checks, one verdict line each,
// exit status zero only when every one passes. Tolerances and thresholds
// are pinned here and nowhere else; the detailed unit suites live next to
// the modules, while this binary asks the end-to-end questions, including
// full baseline training on the standard synthetic benchmark.

#include <sys/wait.h>

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "cvda/config.hpp"
#include "cvda/encoder.hpp"
#include "cvda/error.hpp"
#include "cvda/eval.hpp"
#include "cvda/generator.hpp"
#include "cvda/gradcheck.hpp"
#include "cvda/io_util.hpp"
#include "cvda/losses.hpp"
#include "cvda/manifest.hpp"
#include "cvda/reference.hpp"
#include "cvda/rng.hpp"
#include "cvda/sync.hpp"
#include "cvda/trainer.hpp"

using namespace cvda;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ref::Rows to_rows(const Mat& m) {
  ref::Rows r(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

// ---------------------------------------------------------------------------
// 1. Loss and ranking values against scalar-loop oracles.

bool criterion_oracles(std::string& detail) {
  auto t0 = Clock::now();
  Rng rng(derive_stream(7, "acceptance/oracles"));
  double worst = 0.0;
  bool topk_exact = true;

  for (int trial = 0; trial < 100; ++trial) {
    int B = 1 + static_cast<int>(rng.index(8));
    int K = 2 + static_cast<int>(rng.index(5));
    int d = 1 + static_cast<int>(rng.index(8));

    Mat logits(B, K);
    std::vector<int> labels(B);
    for (int i = 0; i < B; ++i) {
      labels[i] = static_cast<int>(rng.index(K));
      for (int j = 0; j < K; ++j) logits(i, j) = rng.uniform(-4.0, 4.0);
    }
    worst = std::max(worst, std::fabs(cross_entropy(logits, labels).value -
                                      ref::cross_entropy(to_rows(logits), labels)));

    int half = 1 + static_cast<int>(rng.index(4));
    Mat raw(2 * half, std::max(2, d));
    for (int i = 0; i < raw.rows(); ++i)
      for (int j = 0; j < raw.cols(); ++j) raw(i, j) = rng.uniform(-2.0, 2.0);
    Mat z = l2_normalize_rows(raw);
    std::vector<int> pair_labels(2 * half);
    for (int i = 0; i < half; ++i)
      pair_labels[i] = pair_labels[half + i] = static_cast<int>(rng.index(3));
    double tau = 0.05 + rng.uniform(0.0, 0.5);
    worst = std::max(worst, std::fabs(supcon_loss(z, pair_labels, tau).value -
                                      ref::supcon(to_rows(z), pair_labels, tau)));

    int N = 2 + static_cast<int>(rng.index(7));
    Mat s(N, d), t(N, d);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < d; ++j) {
        s(i, j) = rng.uniform(-2.0, 2.0);
        t(i, j) = rng.uniform(-2.0, 2.0);
      }
    double lambda = rng.uniform(0.0, 0.1);
    worst = std::max(worst, std::fabs(ib_loss(s, t, lambda).value -
                                      ref::ib(to_rows(s), to_rows(t), lambda)));

    Mat coarse(B, K);
    for (int i = 0; i < B; ++i)
      for (int j = 0; j < K; ++j)
        coarse(i, j) = 0.5 * static_cast<double>(rng.index(4));
    int k = 1 + static_cast<int>(rng.index(K));
    topk_exact = topk_exact && topk_accuracy(coarse, labels, k) ==
                                   ref::topk_accuracy(to_rows(coarse), labels, k);
  }

  double secs = seconds_since(t0);
  detail = "loss/ranking oracle equivalence over 100 instances each (max diff " +
           fmt_double(worst) + ", " + fmt_fixed(secs, 2) + " s)";
  return worst <= 1e-9 && topk_exact && secs < 10.0;
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients against central finite differences.

bool criterion_gradients(std::string& detail) {
  auto t0 = Clock::now();
  double worst_loss = 0.0, worst_enc = 0.0;
  bool ok = true;
  for (const auto& r : loss_gradchecks(7, 20, 1e-4)) {
    ok = ok && r.pass();
    worst_loss = std::max(worst_loss, r.max_rel);
  }
  for (const auto& r : encoder_gradchecks(7, 20, 1e-3)) {
    ok = ok && r.pass();
    worst_enc = std::max(worst_enc, r.max_rel);
  }
  double secs = seconds_since(t0);
  detail = "finite-difference gradients, 20 instances each (losses max rel " +
           fmt_double(worst_loss) + " < 1e-4, composition max rel " +
           fmt_double(worst_enc) + " < 1e-3, " + fmt_fixed(secs, 2) + " s)";
  return ok && secs < 60.0;
}

// ---------------------------------------------------------------------------
// 3. Closed-form loss values.

bool criterion_closed_forms(std::string& detail) {
  bool ok = true;

  // Uniform logits: CE is exactly ln K.
  Mat uniform = Mat::Constant(3, 7, 0.37);
  double ce = cross_entropy(uniform, {0, 3, 6}).value;
  ok = ok && std::fabs(ce - std::log(7.0)) <= 1e-12;

  // All 2B projections identical and same-class: every similarity ties, so
  // each anchor contributes ln(2B - 1) regardless of temperature.
  int B = 3;
  Mat same = Mat::Zero(2 * B, 4);
  same.col(1).setOnes();
  std::vector<int> same_labels(2 * B, 2);
  double sc = supcon_loss(same, same_labels, 0.1).value;
  ok = ok && std::fabs(sc - std::log(2.0 * B - 1.0)) <= 1e-9;

  // A single positive pair: the softmax has one term, so the loss is zero.
  Mat pair(2, 3);
  pair << 1.0, 0.0, 0.0,  //
      0.0, 1.0, 0.0;
  double single = supcon_loss(pair, {5, 5}, 0.3).value;
  ok = ok && std::fabs(single) <= 1e-12;

  // Integer designs with exactly orthogonal standardized columns: equal
  // sides give the identity correlation (loss 0); sides orthogonal to both
  // source columns give the zero correlation (loss d).
  Mat s(4, 2);
  s << 1, 1,  //
      1, -1,  //
      -1, 1,  //
      -1, -1;
  IbResult ident = ib_loss(s, s, 5e-3);
  ok = ok && std::fabs(ident.value) <= 1e-9;
  Mat t(4, 2);
  t << 1, 1,  //
      -1, -1,  //
      -1, -1,  //
      1, 1;
  IbResult zero = ib_loss(s, t, 5e-3);
  ok = ok && std::fabs(zero.value - 2.0) <= 1e-9;

  detail = "closed forms: uniform CE = ln K, tied contrastive = ln(2B-1), "
           "single pair = 0, identity/zero correlation = 0/d";
  return ok;
}

// ---------------------------------------------------------------------------
// Shared small benchmark for the freeze criterion.

struct SmallBench {
  TrainConfig cfg;
  Corpus corpus;
  std::vector<SyncGroup> groups;
  SplitAssignment splits;
};

SmallBench small_bench() {
  SmallBench b;
  b.cfg.K = 4;
  b.cfg.T = 2;
  b.cfg.H = 8;
  b.cfg.W = 8;
  b.cfg.d_model = 8;
  b.cfg.n_blocks = 2;
  b.cfg.n_heads = 2;
  b.cfg.patch_t = 2;
  b.cfg.patch_hw = 8;
  b.cfg.d_proj = 4;
  b.cfg.epochs_phase1 = 2;
  b.cfg.epochs_phase2 = 2;
  b.cfg.batch_phase1 = 4;
  b.cfg.batch_phase2 = 6;
  b.cfg.queue_capacity = 8;
  b.cfg.seed = 7;
  require_valid(b.cfg);

  GeneratorSpec spec = default_generator_spec(b.cfg.K, 5, 2);
  spec.T = b.cfg.T;
  spec.H = b.cfg.H;
  spec.W = b.cfg.W;
  rebuild_standard_tables(spec);
  b.corpus = generate_corpus(spec);
  b.groups = build_sync_groups(b.corpus.manifest, 1, {2, 3}, 1);
  b.splits = stratified_split(b.groups, 0.7, 0.15, 0.15,
                              derive_stream(b.cfg.seed, "split"));
  return b;
}

// ---------------------------------------------------------------------------
// 4. Selective freezing is bit-exact across a whole adaptation run.

bool criterion_freeze(std::string& detail) {
  SmallBench b = small_bench();
  PhaseResult p1 = train_phase1(make_phase1_data(b.corpus, b.groups, b.splits), b.cfg);
  PhaseResult p2 =
      train_phase2(p1.best_params, make_phase2_data(b.corpus, b.groups, b.splits),
                   b.cfg);

  FreezeMask mask = make_freeze_mask(b.cfg.freeze_fraction, b.cfg.n_blocks);
  auto start_refs = param_refs(p1.best_params);
  auto final_refs = param_refs(p2.final_params);
  if (start_refs.size() != final_refs.size()) {
    detail = "parameter registries disagree";
    return false;
  }

  int frozen = 0, moved = 0;
  bool exact = true;
  for (size_t i = 0; i < start_refs.size(); ++i) {
    size_t bytes = static_cast<size_t>(start_refs[i].size()) * sizeof(double);
    bool same = std::memcmp(start_refs[i].data, final_refs[i].data, bytes) == 0;
    if (is_frozen(start_refs[i], mask)) {
      ++frozen;
      exact = exact && same;
    } else if (!same) {
      ++moved;
    }
  }
  detail = "after " + std::to_string(b.cfg.epochs_phase2) +
           " adaptation epochs, all " + std::to_string(frozen) +
           " frozen tensors bit-equal their pretrained values (" +
           std::to_string(moved) + " trainable tensors moved)";
  return exact && frozen > 0 && moved > 0;
}

// ---------------------------------------------------------------------------
// 5. The full baseline pipeline is byte-deterministic through the CLI.

int run_silent(const std::string& cmd) {
  std::string full = cmd + " > /dev/null 2>&1";
  int rc = std::system(full.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

bool criterion_determinism(std::string& detail) {
  fs::path tmp = fs::temp_directory_path() / "cvda_acceptance_det";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  std::string bin = CVDA_BIN_PATH;

  write_text(tmp / "spec.txt",
             "K = 4\nn_clips_per_class = 6\nT = 4\nH = 16\nW = 16\nC = 3\nseed = 5\n");
  write_text(tmp / "config.txt",
             "K = 4\nT = 4\nH = 16\nW = 16\nC = 3\n"
             "d_model = 16\nn_blocks = 1\nn_heads = 2\npatch_t = 2\npatch_hw = 8\n"
             "d_proj = 8\nepochs_phase1 = 2\nepochs_phase2 = 2\n"
             "batch_phase1 = 4\nbatch_phase2 = 8\nqueue_capacity = 16\n");

  std::string spec = (tmp / "spec.txt").string();
  std::string cfg = (tmp / "config.txt").string();
  std::string home = (tmp / "home").string();
  std::string foreign = (tmp / "foreign").string();
  if (run_silent(bin + " gen-data --spec " + spec + " --out " + home) != 0 ||
      run_silent(bin + " gen-foreign --spec " + spec + " --seed 11 --out " +
                 foreign) != 0) {
    detail = "data generation failed";
    return false;
  }

  std::string base_cmd = bin + " baseline --kind all --seed 7 --data " + home +
                         " --foreign " + foreign + " --config " + cfg + " --out ";
  if (run_silent(base_cmd + (tmp / "run_a").string()) != 0 ||
      run_silent(base_cmd + (tmp / "run_b").string()) != 0) {
    detail = "baseline runs failed";
    return false;
  }

  std::set<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(tmp / "run_a"))
    names_a.insert(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(tmp / "run_b"))
    names_b.insert(e.path().filename().string());
  if (names_a != names_b || names_a.empty()) {
    detail = "run directories hold different file sets";
    return false;
  }

  int checkpoints = 0, identical = 0;
  bool all_equal = true;
  for (const auto& name : names_a) {
    auto a = read_binary_file(tmp / "run_a" / name);
    auto b = read_binary_file(tmp / "run_b" / name);
    bool same = a == b;
    all_equal = all_equal && same;
    if (name.size() > 5 && name.substr(name.size() - 5) == ".ckpt") ++checkpoints;
    if (same) ++identical;
  }
  fs::remove_all(tmp);
  detail = "two `baseline --kind all --seed 7` runs: " + std::to_string(identical) +
           "/" + std::to_string(names_a.size()) + " artifacts byte-identical (" +
           std::to_string(checkpoints) + " checkpoints, metrics, tables)";
  return all_equal && checkpoints == 4;
}

// ---------------------------------------------------------------------------
// 6. Qualitative structure of the baseline comparison on the standard
//    benchmark: margins pinned up front, checked against a fresh run.

double cell_top1(const EvalMatrix& m, const std::string& baseline,
                 const std::string& corpus, int view, int modality) {
  for (const auto& c : m.cells)
    if (c.baseline == baseline && c.corpus == corpus && c.view == view &&
        c.modality == modality)
      return c.top1;
  throw Error("eval cell missing: " + baseline + " " + corpus);
}

bool criterion_benchmark(std::string& detail) {
  auto t0 = Clock::now();

  GeneratorSpec spec = default_generator_spec(8, 48, 1);
  Corpus home = generate_corpus(spec);
  Corpus foreign = generate_foreign_corpus(spec, 11);

  TrainConfig cfg;
  cfg.seed = 7;
  require_valid(cfg);
  auto groups = build_sync_groups(home.manifest, 1, {2, 3}, 1);
  auto splits =
      stratified_split(groups, 0.7, 0.15, 0.15, derive_stream(cfg.seed, "split"));

  auto runs = run_all_baselines(home, groups, splits, cfg);
  std::vector<std::pair<std::string, const EncoderParams*>> named;
  for (const auto& r : runs) named.emplace_back(baseline_name(r.kind), &r.final_params);
  EvalMatrix m = evaluate_matrix(named, home, splits, &foreign);

  double ft_v4 = cell_top1(m, "finetune_only", "home", 4, kModSource);
  double ftc_v4 = cell_top1(m, "finetune_contrastive", "home", 4, kModSource);
  double ftc_b = cell_top1(m, "finetune_contrastive", "home", 1, kModTarget);
  double uda_b = cell_top1(m, "uda_only", "home", 1, kModTarget);
  double full_b = cell_top1(m, "full_method", "home", 1, kModTarget);
  double f_ft = cell_top1(m, "finetune_only", "foreign", 1, kModTarget);
  double f_uda = cell_top1(m, "uda_only", "foreign", 1, kModTarget);
  double f_full = cell_top1(m, "full_method", "foreign", 1, kModTarget);

  bool a = full_b - ftc_b >= 0.10;
  bool b = full_b >= uda_b;
  bool c = ftc_v4 - ft_v4 >= 0.10;
  bool d = f_full > f_uda && f_uda > f_ft;
  double secs = seconds_since(t0);
  bool in_time = secs < 900.0;

  std::printf("       target-modality top-1: full %.3f vs contrastive %.3f "
              "(gap %.3f, need >= 0.10) %s\n",
              full_b, ftc_b, full_b - ftc_b, a ? "ok" : "VIOLATED");
  std::printf("       target-modality top-1: full %.3f vs adaptation-only %.3f "
              "%s\n",
              full_b, uda_b, b ? "ok" : "VIOLATED");
  std::printf("       held-out-view top-1: contrastive %.3f vs plain %.3f "
              "(gap %.3f, need >= 0.10) %s\n",
              ftc_v4, ft_v4, ftc_v4 - ft_v4, c ? "ok" : "VIOLATED");
  std::printf("       foreign-corpus top-1: full %.3f > adaptation-only %.3f > "
              "plain %.3f %s\n",
              f_full, f_uda, f_ft, d ? "ok" : "VIOLATED");

  detail = "baseline comparison structure on the standard benchmark (" +
           fmt_fixed(secs, 1) + " s of < 900 s budget)";
  return a && b && c && d && in_time;
}

// ---------------------------------------------------------------------------
// 7. Synchronization against the quadratic oracle plus split invariants.

Manifest acceptance_manifest(Rng& rng) {
  Manifest m;
  int n_classes = 2 + static_cast<int>(rng.index(3));
  for (int k = 0; k < n_classes; ++k)
    m.class_names.push_back("c" + std::to_string(k));
  m.n_views = 4;
  int idx = 0;
  auto add = [&](int view, int modality, int class_id, int64_t s, int64_t e) {
    if (m.records.size() >= 200) return;
    SampleRecord r;
    r.clip_ref = "r" + std::to_string(idx++) + ".bin";
    r.view = view;
    r.modality = modality;
    r.class_id = class_id;
    r.start_frame = s;
    r.end_frame = e;
    m.records.push_back(r);
  };

  // Every class gets enough distinct events to be splittable; the aligner
  // still sees missing views, duplicate windows, partial overlaps, target
  // rows, and the held-out view.
  for (int k = 0; k < n_classes; ++k) {
    int events = 3 + static_cast<int>(rng.index(6));
    for (int e = 0; e < events; ++e) {
      int64_t start = 40 * e + static_cast<int64_t>(rng.index(8));
      int64_t end = start + 8 + static_cast<int64_t>(rng.index(16));
      add(1, kModSource, k, start, end);
      if (rng.index(4) != 0) add(2, kModSource, k, start - 2 + rng.index(5), end);
      if (rng.index(4) != 0) add(3, kModSource, k, start, end + rng.index(6));
      if (rng.index(3) == 0)  // a competing candidate with another window
        add(2, kModSource, k, start + rng.index(10), end + rng.index(10));
      if (rng.index(5) == 0) add(4, kModSource, k, start, end);
      if (rng.index(5) == 0) add(1, kModTarget, k, start, end);
    }
  }
  return m;
}

bool criterion_sync(std::string& detail) {
  Rng rng(derive_stream(7, "acceptance/sync"));
  bool sync_ok = true, split_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    Manifest m = acceptance_manifest(rng);
    auto got = build_sync_groups(m, 1, {2, 3}, 1);
    auto want = ref::brute_force_sync_groups(m, 1);
    bool same = got.size() == want.size();
    for (size_t i = 0; same && i < got.size(); ++i)
      same = got[i].anchor_idx == want[i].anchor_idx &&
             got[i].positive_idx == want[i].positive_idx &&
             got[i].class_id == want[i].class_id &&
             got[i].overlap_start == want[i].overlap_start &&
             got[i].overlap_end == want[i].overlap_end &&
             got[i].singleton == want[i].singleton &&
             got[i].group_id == want[i].group_id;
    sync_ok = sync_ok && same;

    auto split = stratified_split(got, 0.7, 0.15, 0.15, rng.next_u64());
    split_ok = split_ok && validate_split_assignment(split, got).empty();
  }
  detail = "synchronization matches the quadratic oracle and splits pass the "
           "leakage/fraction audit on 50 random manifests";
  return sync_ok && split_ok;
}

}  // namespace

int main() {
  struct Criterion {
    int index;
    bool (*fn)(std::string&);
  };
  const Criterion criteria[] = {
      {1, criterion_oracles},   {2, criterion_gradients}, {3, criterion_closed_forms},
      {4, criterion_freeze},    {5, criterion_determinism},
      {6, criterion_benchmark}, {7, criterion_sync},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", c.index,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }

  if (failures) {
    std::printf("acceptance: %d of 7 criteria FAILED\n", failures);
    return 1;
  }
  std::printf("acceptance: 7/7 criteria pass\n");
  return 0;
}
