// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cvda/manifest.hpp"
#include "cvda/types.hpp"

namespace cvda {

// Aligns anchor-view records with their positive-view counterparts. For
// every source-modality record of anchor_view, each view in `positives`
// contributes its best same-class record whose half-open frame interval
// overlaps the anchor's by at least min_overlap_frames; best means maximal
// overlap, ties broken by smaller start_frame then lexicographic clip_ref
// (and finally record order, which matters only for exact duplicates).
// Anchors missing a match in ANY positive view come back as flagged
// singletons with empty positive lists. Positive-view source-modality
// records must be labeled whenever at least one anchor record exists.
std::vector<SyncGroup> build_sync_groups(const Manifest& manifest, int anchor_view,
                                         const std::vector<int>& positives,
                                         int min_overlap_frames);

// Per-class split: distinct group ids are sorted, shuffled with a
// class-indexed substream of `seed`, and cut contiguously at the fraction
// boundaries with largest-remainder rounding (remainder ties go to the
// earlier split, train before val before test). Every class needs at least
// 3 distinct groups.
SplitAssignment stratified_split(const std::vector<SyncGroup>& groups, double f_train,
                                 double f_val, double f_test, uint64_t seed);

// Invariant audit for an assignment over the groups it was built from:
// every group id mapped, and each class's realized train share within
// max(0.05, 1/n_k) of the target fraction (the absolute floor is the best
// any rounding can do for tiny classes). Returns violations by name.
std::vector<std::string> validate_split_assignment(const SplitAssignment& split,
                                                   const std::vector<SyncGroup>& groups);

// Text round-trip: one header line, then "group_id<TAB>split" rows in
// sorted order.
void save_split(const std::filesystem::path& path, const SplitAssignment& split);
SplitAssignment load_split(const std::filesystem::path& path);

// Text round-trip for a group list, in list order (which is anchor record
// order for build_sync_groups output). Rows carry manifest record indices,
// so a saved list is only meaningful next to the manifest it was built
// from; load re-validates every index and class against that manifest.
void save_sync_groups(const std::filesystem::path& path,
                      const std::vector<SyncGroup>& groups);
std::vector<SyncGroup> load_sync_groups(const std::filesystem::path& path,
                                        const Manifest& manifest);

}  // namespace cvda
