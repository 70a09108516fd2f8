// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cvda {

// Shortest round-trip decimal form of x (std::to_chars). Locale-free and
// byte-stable, which keeps metrics files and tables reproducible.
std::string fmt_double(double x);

// Fixed-precision decimal form, e.g. fmt_fixed(0.5, 4) == "0.5000".
std::string fmt_fixed(double x, int precision);

std::string read_text_file(const std::filesystem::path& p);
void write_text_file(const std::filesystem::path& p, const std::string& text);

std::vector<uint8_t> read_binary_file(const std::filesystem::path& p);
void write_binary_file(const std::filesystem::path& p, const void* data, size_t size);

// Splits into lines on '\n', dropping a trailing '\r' on each (tolerates
// CRLF input); does not emit a final empty line for a trailing newline.
std::vector<std::string> split_lines(const std::string& text);

std::vector<std::string> split_fields(const std::string& line, char sep);

std::string trim(const std::string& s);

// Parses with full error checking; throws Error naming `what` on junk.
double parse_double(const std::string& s, const std::string& what);
int64_t parse_int(const std::string& s, const std::string& what);

// Advisory single-writer guard for a run directory. Creation fails if the
// lock file already exists; the destructor removes it.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path lock_path_;
};

}  // namespace cvda
