// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cvda {

// Single exception type for all recoverable failures (bad input files,
// dimension mismatches, invalid configs). The CLI catches it at the top
// level and turns the message into a nonzero exit status.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace cvda
