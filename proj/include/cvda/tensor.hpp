// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace cvda {

// All model math runs in 64-bit; clips are promoted from their 32-bit
// storage at the patching step.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

}  // namespace cvda
