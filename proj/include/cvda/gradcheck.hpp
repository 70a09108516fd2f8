// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cvda {

// One finite-difference comparison between an analytic gradient and central
// differences of a scalar function.
//
// Coordinates are compared by relative error where the gradient has usable
// magnitude; coordinates where both sides are tiny (below scale_floor) are
// held to an absolute criterion instead, since relative error on a ~1e-9
// gradient is dominated by truncation noise of the differences themselves.
struct FdReport {
  std::string name;
  int n_coords = 0;
  double max_rel = 0.0;        // over coordinates with scale >= scale_floor
  double max_abs_tiny = 0.0;   // over coordinates below scale_floor
  double rel_tol = 0.0;
  double abs_tol = 0.0;

  bool pass() const { return max_rel < rel_tol && max_abs_tiny < abs_tol; }
};

// Central differences with the given step on every coordinate of x0 (or on
// `coords` if non-empty). f must be deterministic and smooth at x0.
FdReport fd_check(const std::string& name,
                  const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& x0, const std::vector<double>& analytic,
                  double step, double rel_tol, double abs_tol = 1e-8,
                  double scale_floor = 1e-6,
                  const std::vector<int>& coords = {});

// Randomized gradient checks for the three losses, `instances` cases each:
// cross-entropy w.r.t. logits, the contrastive loss composed with row
// normalization w.r.t. raw projections, and the alignment loss w.r.t. both
// feature sides. Shapes stay small (B <= 8, d <= 8, K <= 6).
std::vector<FdReport> loss_gradchecks(uint64_t seed, int instances, double rel_tol);

// Gradient check of the full encode -> classify -> cross-entropy chain on a
// tiny model (d_model=8, 2 blocks, T=2, H=W=8 clips), sweeping every
// parameter coordinate. Parameters are drawn at a generic random point so
// all gradient paths carry usable magnitude.
std::vector<FdReport> encoder_gradchecks(uint64_t seed, int instances, double rel_tol);

}  // namespace cvda
