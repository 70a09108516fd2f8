// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/io_util.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "cvda/error.hpp"

namespace cvda {

std::string fmt_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string fmt_fixed(double x, int precision) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  check(in.good(), "cannot open file: " + p.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

void write_text_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  check(out.good(), "cannot open file for writing: " + p.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  check(out.good(), "write failed: " + p.string());
}

std::vector<uint8_t> read_binary_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  check(in.good(), "cannot open file: " + p.string());
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  return data;
}

void write_binary_file(const std::filesystem::path& p, const void* data, size_t size) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  check(out.good(), "cannot open file for writing: " + p.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  check(out.good(), "write failed: " + p.string());
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    size_t end = (nl == std::string::npos) ? text.size() : nl;
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  size_t pos = 0;
  for (;;) {
    size_t s = line.find(sep, pos);
    if (s == std::string::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, s - pos));
    pos = s + 1;
  }
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, const std::string& what) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  double v = 0.0;
  auto res = std::from_chars(begin, end, v);
  check(res.ec == std::errc() && res.ptr == end, "invalid number for " + what + ": '" + s + "'");
  return v;
}

int64_t parse_int(const std::string& s, const std::string& what) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  int64_t v = 0;
  auto res = std::from_chars(begin, end, v);
  check(res.ec == std::errc() && res.ptr == end, "invalid integer for " + what + ": '" + s + "'");
  return v;
}

DirLock::DirLock(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  lock_path_ = dir / "LOCK";
  // O_EXCL via fopen "x": creation is atomic, a second writer fails fast.
  std::FILE* f = std::fopen(lock_path_.c_str(), "wx");
  if (!f) {
    throw Error("run directory is locked (remove stale " + lock_path_.string() +
                " if no other process is writing): " + std::strerror(errno));
  }
  std::fclose(f);
}

DirLock::~DirLock() {
  std::error_code ec;
  std::filesystem::remove(lock_path_, ec);
}

}  // namespace cvda
