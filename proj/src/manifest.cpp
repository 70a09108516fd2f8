// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/manifest.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>
#include <sstream>

#include "cvda/error.hpp"
#include "cvda/io_util.hpp"

static_assert(std::endian::native == std::endian::little,
              "clip payloads and checkpoints are little-endian files; "
              "big-endian hosts would need byte swapping");

namespace cvda {

ViewRole view_role(int view, int n_views) {
  check(view >= 1 && view <= n_views, "view index out of range");
  if (view == 1) return ViewRole::anchor;
  if (view == n_views) return ViewRole::held_out;
  return ViewRole::positive;
}

std::string view_name(int view) { return "V" + std::to_string(view); }

int parse_view_name(const std::string& name) {
  check(name.size() >= 2 && name[0] == 'V', "bad view name '" + name + "'");
  int v = static_cast<int>(parse_int(name.substr(1), "view"));
  check(v >= 1, "bad view name '" + name + "'");
  return v;
}

std::string modality_name(int modality) {
  check(modality == kModSource || modality == kModTarget, "bad modality index");
  return modality == kModSource ? "modA" : "modB";
}

int parse_modality_name(const std::string& name) {
  if (name == "modA") return kModSource;
  if (name == "modB") return kModTarget;
  throw Error("bad modality name '" + name + "'");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  throw Error("bad split value");
}

Split parse_split_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw Error("bad split name '" + name + "'");
}

std::string group_key(int class_id, int64_t start_frame, int64_t end_frame) {
  return std::to_string(class_id) + ":" + std::to_string(start_frame) + "-" +
         std::to_string(end_frame);
}

namespace {

std::string header_line(const Manifest& m) {
  std::ostringstream h;
  h << "#manifest schema_version=" << m.schema_version << " classes=";
  for (size_t i = 0; i < m.class_names.size(); ++i) {
    if (i) h << ",";
    h << m.class_names[i];
  }
  h << " views=";
  for (int v = 1; v <= m.n_views; ++v) {
    if (v > 1) h << ",";
    h << view_name(v) << ":";
    switch (view_role(v, m.n_views)) {
      case ViewRole::anchor: h << "anchor"; break;
      case ViewRole::positive: h << "positive"; break;
      case ViewRole::held_out: h << "held_out"; break;
    }
  }
  h << " modalities=modA:source,modB:target";
  return h.str();
}

// Parses "key=a,b,c" tokens out of the header.
std::string header_field(const std::string& header, const std::string& key) {
  std::string needle = " " + key + "=";
  size_t pos = header.find(needle);
  check(pos != std::string::npos, "manifest header missing '" + key + "'");
  size_t start = pos + needle.size();
  size_t end = header.find(' ', start);
  if (end == std::string::npos) end = header.size();
  return header.substr(start, end - start);
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& p) {
  auto lines = split_lines(read_text_file(p));
  check(!lines.empty() && lines[0].rfind("#manifest", 0) == 0,
        p.string() + ": missing '#manifest' header line");
  const std::string& header = lines[0];

  Manifest m;
  m.schema_version =
      static_cast<int>(parse_int(header_field(header, "schema_version"), "schema_version"));
  check(m.schema_version == 1, p.string() + ": unsupported schema_version");

  m.class_names = split_fields(header_field(header, "classes"), ',');
  check(!m.class_names.empty(), p.string() + ": empty class list");
  std::set<std::string> distinct(m.class_names.begin(), m.class_names.end());
  check(distinct.size() == m.class_names.size(), p.string() + ": duplicate class names");

  auto views = split_fields(header_field(header, "views"), ',');
  m.n_views = static_cast<int>(views.size());
  check(m.n_views >= 3, p.string() + ": need at least 3 views");
  for (int v = 1; v <= m.n_views; ++v) {
    auto parts = split_fields(views[v - 1], ':');
    check(parts.size() == 2 && parse_view_name(parts[0]) == v,
          p.string() + ": view list must be V1..Vn in order");
  }

  auto mods = split_fields(header_field(header, "modalities"), ',');
  check(mods.size() == 2 && mods[0] == "modA:source" && mods[1] == "modB:target",
        p.string() + ": modalities must be modA:source,modB:target");

  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split_fields(lines[i], '\t');
    check(f.size() == 6, p.string() + ":" + std::to_string(i + 1) +
                             ": expected 6 tab-separated fields");
    SampleRecord r;
    r.clip_ref = f[0];
    r.view = parse_view_name(f[1]);
    check(r.view <= m.n_views, p.string() + ":" + std::to_string(i + 1) + ": view out of range");
    r.modality = parse_modality_name(f[2]);
    if (f[3] == "-") {
      r.class_id = kNoLabel;
    } else {
      auto it = std::find(m.class_names.begin(), m.class_names.end(), f[3]);
      check(it != m.class_names.end(),
            p.string() + ":" + std::to_string(i + 1) + ": unknown class '" + f[3] + "'");
      r.class_id = static_cast<int>(it - m.class_names.begin());
    }
    r.start_frame = parse_int(f[4], "start_frame");
    r.end_frame = parse_int(f[5], "end_frame");
    check(r.start_frame < r.end_frame,
          p.string() + ":" + std::to_string(i + 1) + ": start_frame must be < end_frame");
    m.records.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& p) {
  std::ostringstream out;
  out << header_line(m) << "\n";
  for (const auto& r : m.records) {
    out << r.clip_ref << "\t" << view_name(r.view) << "\t" << modality_name(r.modality)
        << "\t";
    if (r.class_id == kNoLabel) {
      out << "-";
    } else {
      check(r.class_id >= 0 && r.class_id < m.K(), "record class_id out of range");
      out << m.class_names[r.class_id];
    }
    out << "\t" << r.start_frame << "\t" << r.end_frame << "\n";
  }
  write_text_file(p, out.str());
}

Manifest load_manifest_unlabeled(const std::filesystem::path& p) {
  Manifest m = load_manifest(p);
  for (auto& r : m.records) r.class_id = kNoLabel;
  return m;
}

void save_clip_payload(const Clip& clip, const std::filesystem::path& p) {
  check(clip.data.size() == clip.size(), "clip payload size mismatch");
  write_binary_file(p, clip.data.data(), clip.data.size() * sizeof(float));
}

Clip load_clip(const std::filesystem::path& manifest_dir, const SampleRecord& rec,
               int T, int H, int W, int C) {
  Clip clip;
  clip.T = T;
  clip.H = H;
  clip.W = W;
  clip.C = C;
  clip.view = rec.view;
  clip.modality = rec.modality;
  clip.class_id = rec.class_id;
  clip.clip_id = rec.clip_ref;
  clip.start_frame = rec.start_frame;
  clip.end_frame = rec.end_frame;

  auto bytes = read_binary_file(manifest_dir / rec.clip_ref);
  size_t expect = static_cast<size_t>(T) * H * W * C * sizeof(float);
  check(bytes.size() == expect,
        "clip file " + rec.clip_ref + " has " + std::to_string(bytes.size()) +
            " bytes, expected " + std::to_string(expect) +
            " (T*H*W*C mismatch with config)");
  clip.data.resize(clip.size());
  std::memcpy(clip.data.data(), bytes.data(), bytes.size());
  return clip;
}

}  // namespace cvda
