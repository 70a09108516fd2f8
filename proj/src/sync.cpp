// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/sync.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cvda/error.hpp"
#include "cvda/io_util.hpp"
#include "cvda/rng.hpp"

namespace cvda {

std::vector<SyncGroup> build_sync_groups(const Manifest& manifest, int anchor_view,
                                         const std::vector<int>& positives,
                                         int min_overlap_frames) {
  check(min_overlap_frames >= 1, "min_overlap_frames must be >= 1");
  {
    std::set<int> seen;
    for (int v : positives) {
      check(v != anchor_view, "anchor view cannot also be a positive view");
      check(seen.insert(v).second, "positive views must be distinct");
    }
  }

  // Candidate buckets per (positive view, class), in record order so that
  // duplicate-record ties resolve to the earliest record.
  std::set<int> positive_set(positives.begin(), positives.end());
  std::map<int, std::map<int, std::vector<int>>> buckets;
  bool has_anchor = false;
  bool unlabeled_positive = false;
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    const SampleRecord& rec = manifest.records[i];
    if (rec.modality != kModSource) continue;
    if (rec.view == anchor_view) has_anchor = true;
    if (positive_set.count(rec.view)) {
      if (rec.class_id == kNoLabel) unlabeled_positive = true;
      buckets[rec.view][rec.class_id].push_back(static_cast<int>(i));
    }
  }
  // Auxiliary views inherit the source labels by construction; an unlabeled
  // record there is a corrupt manifest, not a matching decision.
  check(!(has_anchor && unlabeled_positive), "positive-view record without a label");

  std::vector<SyncGroup> groups;
  for (size_t a = 0; a < manifest.records.size(); ++a) {
    const SampleRecord& anchor = manifest.records[a];
    if (anchor.view != anchor_view || anchor.modality != kModSource) continue;

    SyncGroup g;
    g.anchor_idx = static_cast<int>(a);
    g.class_id = anchor.class_id;
    g.overlap_start = anchor.start_frame;
    g.overlap_end = anchor.end_frame;
    g.group_id = group_key(anchor.class_id, anchor.start_frame, anchor.end_frame);

    bool all_views_matched = true;
    for (int v : positives) {
      int best = -1;
      int64_t best_overlap = 0;
      auto vit = buckets.find(v);
      if (vit != buckets.end()) {
        auto cit = vit->second.find(anchor.class_id);
        if (cit != vit->second.end()) {
          for (int idx : cit->second) {
            const SampleRecord& cand = manifest.records[idx];
            int64_t lo = std::max(anchor.start_frame, cand.start_frame);
            int64_t hi = std::min(anchor.end_frame, cand.end_frame);
            int64_t overlap = hi - lo;
            if (overlap < min_overlap_frames) continue;
            if (best < 0) {
              best = idx;
              best_overlap = overlap;
              continue;
            }
            const SampleRecord& prev = manifest.records[best];
            bool wins =
                overlap > best_overlap ||
                (overlap == best_overlap && cand.start_frame < prev.start_frame) ||
                (overlap == best_overlap && cand.start_frame == prev.start_frame &&
                 cand.clip_ref < prev.clip_ref);
            if (wins) {
              best = idx;
              best_overlap = overlap;
            }
          }
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

SplitAssignment stratified_split(const std::vector<SyncGroup>& groups, double f_train,
                                 double f_val, double f_test, uint64_t seed) {
  check(f_train >= 0.0 && f_val >= 0.0 && f_test >= 0.0,
        "split fractions must be nonnegative");
  check(std::abs(f_train + f_val + f_test - 1.0) < 1e-9,
        "split fractions must sum to 1");

  // Distinct group ids per class; duplicates (re-listed events) collapse.
  std::map<int, std::set<std::string>> per_class;
  for (const auto& g : groups) per_class[g.class_id].insert(g.group_id);

  SplitAssignment out;
  out.f_train = f_train;
  out.f_val = f_val;
  out.f_test = f_test;

  const double frac[3] = {f_train, f_val, f_test};
  for (const auto& [class_id, id_set] : per_class) {
    int n = static_cast<int>(id_set.size());
    check(n >= 3, "class " + std::to_string(class_id) + " has only " +
                      std::to_string(n) + " groups (need >= 3)");

    std::vector<std::string> ids(id_set.begin(), id_set.end());  // sorted
    Rng rng(derive_stream(seed, "split", static_cast<uint64_t>(class_id)));
    rng.shuffle(ids);

    // Largest-remainder seats, remainder ties to the earlier split.
    int count[3];
    double remainder[3];
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
      double quota = n * frac[i];
      count[i] = static_cast<int>(quota);
      remainder[i] = quota - count[i];
      assigned += count[i];
    }
    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3,
                     [&](int x, int y) { return remainder[x] > remainder[y]; });
    for (int s = 0; s < n - assigned; ++s) ++count[order[s]];

    int at = 0;
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < count[i]; ++c)
        out.by_group[ids[at++]] = static_cast<Split>(i);
  }
  return out;
}

std::vector<std::string> validate_split_assignment(
    const SplitAssignment& split, const std::vector<SyncGroup>& groups) {
  std::vector<std::string> bad;

  std::map<int, std::set<std::string>> per_class;
  for (const auto& g : groups) per_class[g.class_id].insert(g.group_id);

  for (const auto& [class_id, id_set] : per_class) {
    int n = static_cast<int>(id_set.size());
    int in_train = 0;
    for (const auto& id : id_set) {
      auto it = split.by_group.find(id);
      if (it == split.by_group.end()) {
        bad.push_back("group " + id + " has no split assignment");
        continue;
      }
      if (it->second == Split::train) ++in_train;
    }
    double share = n > 0 ? static_cast<double>(in_train) / n : 0.0;
    double tol = std::max(0.05, 1.0 / n) + 1e-12;
    if (std::abs(share - split.f_train) > tol)
      bad.push_back("class " + std::to_string(class_id) + " train share " +
                    fmt_fixed(share, 3) + " deviates from " +
                    fmt_fixed(split.f_train, 3) + " by more than " +
                    fmt_fixed(tol, 3));
  }
  return bad;
}

void save_split(const std::filesystem::path& path, const SplitAssignment& split) {
  std::string text = "#split schema_version=1 fractions=" + fmt_double(split.f_train) +
                     "," + fmt_double(split.f_val) + "," + fmt_double(split.f_test) +
                     "\n";
  for (const auto& [id, s] : split.by_group)
    text += id + "\t" + split_name(s) + "\n";
  write_text_file(path, text);
}

SplitAssignment load_split(const std::filesystem::path& path) {
  auto lines = split_lines(read_text_file(path));
  check(!lines.empty() && lines[0].rfind("#split ", 0) == 0,
        "not a split file (missing header)");

  SplitAssignment out;
  auto head = split_fields(lines[0], ' ');
  bool have_fractions = false;
  for (const auto& field : head) {
    auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    std::string key = field.substr(0, eq);
    std::string val = field.substr(eq + 1);
    if (key == "schema_version") {
      check(val == "1", "unsupported split schema_version " + val);
    } else if (key == "fractions") {
      auto parts = split_fields(val, ',');
      check(parts.size() == 3, "split header fractions must have 3 entries");
      out.f_train = parse_double(parts[0], "f_train");
      out.f_val = parse_double(parts[1], "f_val");
      out.f_test = parse_double(parts[2], "f_test");
      have_fractions = true;
    }
  }
  check(have_fractions, "split header missing fractions");

  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = split_fields(lines[i], '\t');
    check(fields.size() == 2, "split line " + std::to_string(i + 1) +
                                  " must be group_id<TAB>split");
    check(out.by_group.find(fields[0]) == out.by_group.end(),
          "split file repeats group " + fields[0]);
    out.by_group[fields[0]] = parse_split_name(fields[1]);
  }
  return out;
}

void save_sync_groups(const std::filesystem::path& path,
                      const std::vector<SyncGroup>& groups) {
  std::string text =
      "#groups schema_version=1 n_groups=" + std::to_string(groups.size()) + "\n";
  text += "anchor_idx\tpositive_idx\tclass\toverlap_start\toverlap_end\tsingleton"
          "\tgroup_id\n";
  for (const auto& g : groups) {
    std::string pos;
    if (g.positive_idx.empty()) {
      pos = "-";
    } else {
      for (size_t i = 0; i < g.positive_idx.size(); ++i) {
        if (i) pos += ',';
        pos += std::to_string(g.positive_idx[i]);
      }
    }
    text += std::to_string(g.anchor_idx) + "\t" + pos + "\t" +
            std::to_string(g.class_id) + "\t" + std::to_string(g.overlap_start) +
            "\t" + std::to_string(g.overlap_end) + "\t" +
            (g.singleton ? "1" : "0") + "\t" + g.group_id + "\n";
  }
  write_text_file(path, text);
}

std::vector<SyncGroup> load_sync_groups(const std::filesystem::path& path,
                                        const Manifest& manifest) {
  auto lines = split_lines(read_text_file(path));
  check(lines.size() >= 2 && lines[0].rfind("#groups ", 0) == 0,
        "not a group file (missing header)");
  check(lines[0].find("schema_version=1") != std::string::npos,
        "unsupported group file schema_version");
  check(lines[1].rfind("anchor_idx\t", 0) == 0, "group file missing column header");

  auto record_idx = [&](const std::string& s, size_t line_no) {
    int64_t v = parse_int(s, "record index");
    check(v >= 0 && v < static_cast<int64_t>(manifest.records.size()),
          "group line " + std::to_string(line_no) + ": record index " + s +
              " outside the manifest");
    return static_cast<int>(v);
  };

  std::vector<SyncGroup> out;
  for (size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_fields(lines[i], '\t');
    check(f.size() == 7, "group line " + std::to_string(i + 1) + " must have 7 fields");

    SyncGroup g;
    g.anchor_idx = record_idx(f[0], i + 1);
    if (f[1] != "-")
      for (const auto& p : split_fields(f[1], ','))
        g.positive_idx.push_back(record_idx(p, i + 1));
    g.class_id = static_cast<int>(parse_int(f[2], "class"));
    g.overlap_start = static_cast<int>(parse_int(f[3], "overlap_start"));
    g.overlap_end = static_cast<int>(parse_int(f[4], "overlap_end"));
    check(f[5] == "0" || f[5] == "1", "group line " + std::to_string(i + 1) +
                                          ": singleton must be 0 or 1");
    g.singleton = f[5] == "1";
    g.group_id = f[6];

    check(g.singleton == g.positive_idx.empty(),
          "group line " + std::to_string(i + 1) +
              ": singleton flag disagrees with the positive list");
    check(manifest.records[g.anchor_idx].class_id == g.class_id,
          "group line " + std::to_string(i + 1) +
              ": class disagrees with the anchor record");
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace cvda
