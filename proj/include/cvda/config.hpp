// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cvda {

// Every tunable of the training pipeline. Serializes to a flat key = value
// text file; unknown keys in a file are errors so that typos fail fast.
struct TrainConfig {
  // Problem shape.
  int K = 8;                 // class count
  int T = 8, H = 32, W = 32, C = 3;

  // Encoder.
  int d_model = 64;
  int n_blocks = 4;
  int n_heads = 4;
  int patch_t = 2;
  int patch_hw = 8;
  int d_proj = 32;

  // Objective weights.
  double tau = 0.1;              // contrastive temperature
  double lambda1 = 1.0;          // phase-1 contrastive weight
  double alpha = 1.0;            // phase-2 alignment weight
  double lambda_offdiag = 5e-3;  // off-diagonal weight inside the alignment loss

  // Optimization.
  double lr_phase1 = 0.001;
  double lr_phase2 = 0.005;
  double weight_decay = 1e-9;
  int epochs_phase1 = 20;
  int epochs_phase2 = 20;
  int batch_phase1 = 8;    // sync groups per step
  int batch_phase2 = 64;   // clips per domain per step

  // Phase-2 policy.
  double freeze_fraction = 0.5;
  int queue_capacity = 256;
  int pairs_per_target = 4;
  double pseudo_conf_threshold = 0.8;

  uint64_t seed = 0;
};

// Returns the list of violated invariants, empty when the config is valid.
// Total function: never throws on bad values, just reports them.
std::vector<std::string> validate_config(const TrainConfig& cfg);

// Throws Error listing all violations when the config is invalid.
void require_valid(const TrainConfig& cfg);

TrainConfig load_train_config(const std::filesystem::path& p);
void save_train_config(const TrainConfig& cfg, const std::filesystem::path& p);

// Shared key = value parser. Returns pairs in file order after stripping
// blank lines and '#' comments; each line must contain a single '='.
std::vector<std::pair<std::string, std::string>> parse_kv_file(
    const std::filesystem::path& p);

}  // namespace cvda
