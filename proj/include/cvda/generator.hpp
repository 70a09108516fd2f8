// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvda/manifest.hpp"
#include "cvda/tensor.hpp"
#include "cvda/types.hpp"

namespace cvda {

// A fixed per-view camera model: an invertible affine warp (rotation about
// the frame center, uniform scale, translation, all in normalized [0,1]^2
// coordinates) plus an additive low-frequency nuisance pattern. Every clip
// of a view goes through the same transform.
struct ViewTransform {
  int view = 1;
  double rot = 0.0;
  double tx = 0.0, ty = 0.0;
  double scale = 1.0;
  Mat view_bias;  // H x W, added to every channel; empty means zero
};

// A fixed per-modality sensor model: channel mixing, gain, and extra sensor
// noise on top of the corpus-wide noise floor.
struct ModalityTransform {
  int modality = kModSource;
  Mat channel_map;  // C x C, full row rank
  double gain = 1.0;
  double noise_sigma_extra = 0.0;
};

struct GeneratorSpec {
  int K = 8;
  int n_clips_per_class = 48;
  std::vector<ViewTransform> views;
  std::vector<ModalityTransform> modalities;
  double noise_sigma = 0.03;
  int latent_dim = 8;  // 4 coordinates (cx, cy, sigma, amp) per rendered blob
  uint64_t seed = 1;
  double shift_magnitude = 1.0;  // used only by the foreign corpus
  int T = 8, H = 32, W = 32, C = 3;
};

// The standard benchmark setup: views V1 (anchor, identity), V2/V3
// (positives, moderate warps), V4 (held out, the strongest warp); modA is
// the identity source sensor, modB mixes channels with extra noise and only
// ever records through the anchor viewpoint.
GeneratorSpec default_generator_spec(int K, int n_clips_per_class, uint64_t seed);

// Replaces spec.views / spec.modalities with the standard tables sized for
// the spec's current T/H/W/C. default_generator_spec uses this internally;
// call it again after changing dims by hand.
void rebuild_standard_tables(GeneratorSpec& spec);

// Scalar-profile round trip in key=value form (same syntax as the training
// config). Only the scalar knobs are stored; loading rebuilds the standard
// view/modality tables for the stored dims, so hand-customized tables do
// not survive a save/load. Unknown keys are an error.
void save_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& p);
GeneratorSpec load_generator_spec(const std::filesystem::path& p);

// Every violated invariant, by name; empty when the spec is usable.
std::vector<std::string> validate_generator_spec(const GeneratorSpec& spec);
void require_valid(const GeneratorSpec& spec);

struct Corpus {
  std::vector<Clip> clips;  // parallel to manifest.records
  Manifest manifest;
};

// Renders every logical event (class k, event e) once per valid
// (view, modality) slot: all views in the source modality plus the anchor
// view in the target modality. Class identity lives in the motion: orbit
// angular speed, rotation direction, and the within-clip size ramp are
// functions of k, while phases and small jitters are event randomness.
// Deterministic given spec; clip noise comes from per-clip substreams.
Corpus generate_corpus(const GeneratorSpec& spec);

// Same latent trajectories (same classes, same events), but view and
// modality parameters perturbed by shift_magnitude using shift_seed
// substreams and the noise floor scaled by (1 + shift_magnitude). A zero
// magnitude reproduces generate_corpus byte for byte. Labels are kept for
// evaluation only.
Corpus generate_foreign_corpus(const GeneratorSpec& spec, uint64_t shift_seed);

// The T x latent_dim latent path of one event in untransformed coordinates,
// rows [cx, cy, sigma, amp] per blob. The foreign corpus renders from the
// identical path, which is what makes its labels trustworthy.
Mat latent_path(const GeneratorSpec& spec, int class_id, int event);

// Writes spec.txt (the scalar profile used to size clips on reload),
// manifest.tsv, and one payload file per record under dir, creating the
// directory tree as needed.
void save_corpus(const Corpus& corpus, const GeneratorSpec& spec,
                 const std::filesystem::path& dir);

// Loads a corpus written by save_corpus; clip dims come from its spec.txt.
// With unlabeled_targets set, target-modality rows are taken from the
// label-stripping manifest path, so their class ids never reach the caller.
// Training commands load through that door; evaluation keeps the labels.
Corpus load_corpus(const std::filesystem::path& dir, bool unlabeled_targets = false);

}  // namespace cvda
