// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cvda/encoder.hpp"
#include "cvda/tensor.hpp"

namespace cvda {

// Cosine decay: lr(e) = base * 0.5 * (1 + cos(pi * e / total)). Starts at
// base, hits zero at e == total, and never increases in between. Training
// evaluates it once per epoch.
double cosine_lr(double base_lr, int epoch, int total_epochs);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // classic L2 coupling: g += wd * theta
};

// Adaptive-moment optimizer over a fixed working set of parameter tensors.
// The working set is captured at construction (names and shapes); every
// step must present the same tensors in the same order, which the aligned
// registries from param_refs / trainable_params guarantee. Parameters
// outside the working set are never touched, so Phase-2 freezing is simply
// a narrower working set.
class Adam {
 public:
  Adam(const std::vector<ParamRef>& working_set, const AdamConfig& cfg);

  // One update: theta -= lr * mhat / (sqrt(vhat) + eps), with bias
  // correction by the post-increment step count. Fresh state plus zero
  // gradient and zero weight decay is an exact no-op.
  void step(const std::vector<ParamRef>& params,
            const std::vector<ParamRef>& grads, double lr);

  int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  int n_slots() const { return static_cast<int>(slots_.size()); }

  // Moment checkpointing, so a finished phase can persist its optimizer
  // alongside the model tensors. The load-side working set must match the
  // saved names and shapes.
  void save(const std::filesystem::path& path) const;
  static Adam load(const std::filesystem::path& path,
                   const std::vector<ParamRef>& working_set);

 private:
  struct Slot {
    std::string name;
    Mat m, v;
  };
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  int64_t t_ = 0;
};

}  // namespace cvda
