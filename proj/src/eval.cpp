// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/eval.hpp"

#include <algorithm>
#include <cstdio>

#include "cvda/error.hpp"
#include "cvda/io_util.hpp"
#include "cvda/manifest.hpp"

namespace cvda {

namespace {

constexpr int kEvalChunk = 32;  // clips encoded per forward

// Rank of `label` under (logit desc, class index asc).
int label_rank(const Mat& logits, Eigen::Index row, int label) {
  int rank = 0;
  const double mine = logits(row, label);
  for (int j = 0; j < logits.cols(); ++j) {
    if (logits(row, j) > mine || (logits(row, j) == mine && j < label)) ++rank;
  }
  return rank;
}

std::vector<int> cell_records(const Corpus& corpus, const SplitAssignment* splits,
                              int view, int modality) {
  std::vector<int> out;
  for (size_t i = 0; i < corpus.manifest.records.size(); ++i) {
    const SampleRecord& r = corpus.manifest.records[i];
    if (r.view != view || r.modality != modality) continue;
    if (splits != nullptr) {
      const std::string key = group_key(r.class_id, r.start_frame, r.end_frame);
      auto it = splits->by_group.find(key);
      if (it == splits->by_group.end())
        throw Error("record " + r.clip_ref + " has no split assignment");
      if (it->second != Split::test) continue;
    }
    out.push_back(static_cast<int>(i));
  }
  return out;
}

struct CellSpec {
  std::string corpus;
  int view;
  int modality;
};

std::vector<CellSpec> cell_specs(int n_views, bool with_foreign) {
  std::vector<CellSpec> specs;
  for (int v = 1; v <= n_views; ++v) specs.push_back({"home", v, kModSource});
  specs.push_back({"home", 1, kModTarget});
  if (with_foreign) {
    specs.push_back({"foreign", 1, kModSource});
    specs.push_back({"foreign", 1, kModTarget});
  }
  return specs;
}

std::string pct(double x) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%5.1f", 100.0 * x);
  return buf;
}

}  // namespace

double topk_accuracy(const Mat& logits, const std::vector<int>& labels, int k) {
  const auto n = logits.rows();
  if (static_cast<size_t>(n) != labels.size())
    throw Error("topk_accuracy: logits rows and labels disagree");
  if (n == 0) throw Error("topk_accuracy: empty batch");
  if (k < 1 || k > logits.cols())
    throw Error("topk_accuracy: k outside [1, K]");
  int hits = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= logits.cols())
      throw Error("topk_accuracy: label outside [0, K)");
    if (label_rank(logits, i, label) < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

Mat score_records(const EncoderParams& p, const Corpus& corpus,
                  const std::vector<int>& records) {
  Mat logits(static_cast<Eigen::Index>(records.size()), p.K);
  for (size_t base = 0; base < records.size(); base += kEvalChunk) {
    const size_t hi = std::min(records.size(), base + kEvalChunk);
    std::vector<const Clip*> clips;
    for (size_t i = base; i < hi; ++i) {
      const int idx = records[i];
      if (idx < 0 || static_cast<size_t>(idx) >= corpus.clips.size())
        throw Error("score_records: record index out of range");
      clips.push_back(&corpus.clips[static_cast<size_t>(idx)]);
    }
    const Mat z = encode_batch(p, clips);
    logits.middleRows(static_cast<Eigen::Index>(base), z.rows()) =
        classify_batch(p, z);
  }
  return logits;
}

double top1_on_records(const EncoderParams& p, const Corpus& corpus,
                       const std::vector<int>& records) {
  const Mat logits = score_records(p, corpus, records);
  std::vector<int> labels;
  labels.reserve(records.size());
  for (int idx : records)
    labels.push_back(corpus.manifest.records[static_cast<size_t>(idx)].class_id);
  return topk_accuracy(logits, labels, 1);
}

EvalMatrix evaluate_matrix(
    const std::vector<std::pair<std::string, const EncoderParams*>>& baselines,
    const Corpus& home, const SplitAssignment& splits, const Corpus* foreign) {
  if (baselines.empty()) throw Error("evaluate_matrix: no baselines given");
  const EncoderParams& first = *baselines.front().second;
  for (const auto& [name, params] : baselines) {
    if (params->d_model != first.d_model || params->n_blocks != first.n_blocks ||
        params->K != first.K || params->d_proj != first.d_proj ||
        params->T != first.T || params->H != first.H || params->W != first.W)
      throw Error("evaluate_matrix: checkpoint dims disagree at " + name);
  }

  EvalMatrix m;
  m.top_k = std::min(5, first.K);
  for (const CellSpec& spec : cell_specs(home.manifest.n_views, foreign != nullptr)) {
    const Corpus& corpus = spec.corpus == "home" ? home : *foreign;
    const SplitAssignment* cut = spec.corpus == "home" ? &splits : nullptr;
    const std::vector<int> rows = cell_records(corpus, cut, spec.view, spec.modality);
    if (rows.empty())
      throw Error("evaluate_matrix: no test rows for " + spec.corpus + " " +
                  view_name(spec.view) + "/" + modality_name(spec.modality));
    std::vector<int> labels;
    for (int idx : rows)
      labels.push_back(corpus.manifest.records[static_cast<size_t>(idx)].class_id);

    for (const auto& [name, params] : baselines) {
      const Mat logits = score_records(*params, corpus, rows);
      EvalCell cell;
      cell.baseline = name;
      cell.corpus = spec.corpus;
      cell.view = spec.view;
      cell.modality = spec.modality;
      cell.top1 = topk_accuracy(logits, labels, 1);
      cell.top5 = topk_accuracy(logits, labels, m.top_k);
      cell.n = static_cast<int>(rows.size());
      m.cells.push_back(std::move(cell));
    }
  }
  return m;
}

std::string render_table(const EvalMatrix& m) {
  // Column order: unique (corpus, view, modality) in cell order.
  std::vector<std::string> cols;
  std::vector<std::string> keys;
  for (const EvalCell& c : m.cells) {
    const std::string key = c.corpus + "|" + view_name(c.view) + "|" +
                            modality_name(c.modality);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      keys.push_back(key);
      const std::string prefix = c.corpus == "foreign" ? "foreign " : "";
      cols.push_back(prefix + view_name(c.view) + "/" + modality_name(c.modality));
    }
  }
  std::vector<std::string> rows;
  for (const EvalCell& c : m.cells)
    if (std::find(rows.begin(), rows.end(), c.baseline) == rows.end())
      rows.push_back(c.baseline);

  size_t name_w = std::string("baseline").size();
  for (const auto& r : rows) name_w = std::max(name_w, r.size());
  size_t col_w = 11;  // "100.0/100.0"
  for (const auto& c : cols) col_w = std::max(col_w, c.size());

  std::string out = "top-1/top-" + std::to_string(m.top_k) +
                    " accuracy (%), test rows per cell\n";
  auto pad = [](const std::string& s, size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  out += pad("baseline", name_w);
  for (const auto& c : cols) out += "  " + pad(c, col_w);
  out += "\n";
  for (const auto& r : rows) {
    out += pad(r, name_w);
    for (const auto& key : keys) {
      bool found = false;
      for (const EvalCell& c : m.cells) {
        const std::string ck = c.corpus + "|" + view_name(c.view) + "|" +
                               modality_name(c.modality);
        if (c.baseline == r && ck == key) {
          out += "  " + pad(pct(c.top1) + "/" + pct(c.top5), col_w);
          found = true;
          break;
        }
      }
      if (!found) out += "  " + pad("-", col_w);
    }
    out += "\n";
  }
  return out;
}

void write_eval_tsv(const EvalMatrix& m, const std::filesystem::path& path) {
  std::string out = "baseline\tcorpus\tview\tmodality\ttop1\ttop5\tn\n";
  for (const EvalCell& c : m.cells) {
    out += c.baseline + "\t" + c.corpus + "\t" + view_name(c.view) + "\t" +
           modality_name(c.modality) + "\t" + fmt_double(c.top1) + "\t" +
           fmt_double(c.top5) + "\t" + std::to_string(c.n) + "\n";
  }
  write_text_file(path, out);
}

}  // namespace cvda
