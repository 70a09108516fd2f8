// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cvda {

// Views are numbered 1..n_views. View 1 is the anchor (the viewpoint whose
// labeled clips drive classification and anchor the contrastive loss), the
// highest-numbered view is held out of training entirely to measure view
// generalization, and everything in between is a positive view.
enum class ViewRole { anchor, positive, held_out };

ViewRole view_role(int view, int n_views);
std::string view_name(int view);
int parse_view_name(const std::string& name);

// Exactly two modalities exist in this build: the labeled source modality
// (modA) and the unlabeled adaptation target (modB). Both share view 1.
inline constexpr int kModSource = 0;
inline constexpr int kModTarget = 1;

std::string modality_name(int modality);
int parse_modality_name(const std::string& name);

inline constexpr int kNoLabel = -1;

// One rendered clip: dense T x H x W x C payload in [0,1] plus identity.
// Stored as 32-bit floats to match the on-disk format; model math promotes
// to double at the patching step.
struct Clip {
  int T = 0, H = 0, W = 0, C = 0;
  std::vector<float> data;  // ((t*H + h)*W + w)*C + c
  int view = 1;
  int modality = kModSource;
  int class_id = kNoLabel;
  std::string clip_id;
  int64_t start_frame = 0;
  int64_t end_frame = 0;

  size_t size() const { return static_cast<size_t>(T) * H * W * C; }
  float& at(int t, int h, int w, int c) {
    return data[((static_cast<size_t>(t) * H + h) * W + w) * C + c];
  }
  float at(int t, int h, int w, int c) const {
    return data[((static_cast<size_t>(t) * H + h) * W + w) * C + c];
  }
};

// One manifest row. class_id is kNoLabel when the annotation carries no
// label (target-modality rows seen through the label-stripping loader).
struct SampleRecord {
  std::string clip_ref;
  int view = 1;
  int modality = kModSource;
  int class_id = kNoLabel;
  int64_t start_frame = 0;
  int64_t end_frame = 0;
};

// An anchor record plus its same-class, temporally overlapping records from
// the positive views. Anchors with no match in some positive view are kept
// as flagged singletons: they still contribute to cross-entropy but not to
// the contrastive term.
struct SyncGroup {
  int anchor_idx = -1;              // index into Manifest::records
  std::vector<int> positive_idx;    // one per positive view, matched order
  int class_id = kNoLabel;
  int64_t overlap_start = 0;
  int64_t overlap_end = 0;
  bool singleton = false;
  std::string group_id;             // event key: "<class>:<start>-<end>"
};

enum class Split { train, val, test };

std::string split_name(Split s);
Split parse_split_name(const std::string& name);

struct SplitAssignment {
  std::map<std::string, Split> by_group;
  double f_train = 0.70, f_val = 0.15, f_test = 0.15;
};

}  // namespace cvda
