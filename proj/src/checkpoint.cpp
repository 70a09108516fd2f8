// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cvda/config.hpp"
#include "cvda/error.hpp"
#include "cvda/io_util.hpp"

namespace cvda {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'C', 'K'};
constexpr uint32_t kVersion = 1;

// Dim keys written into the meta section so checkpoints self-describe.
const char* kDimKeys[] = {"d_model", "n_blocks", "n_heads", "patch_t", "patch_hw",
                          "d_proj",  "K",        "T",       "H",       "W",
                          "C"};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double x) {
  uint64_t bits;
  std::memcpy(&bits, &x, sizeof(bits));
  put_u64(out, bits);
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.append(s);
}

struct Reader {
  const uint8_t* p;
  size_t left;

  void need(size_t n) const { check(left >= n, "checkpoint truncated"); }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double x;
    std::memcpy(&x, &bits, sizeof(x));
    return x;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    left -= n;
    return s;
  }
};

int dim_of(const EncoderParams& p, const std::string& key) {
  if (key == "d_model") return p.d_model;
  if (key == "n_blocks") return p.n_blocks;
  if (key == "n_heads") return p.n_heads;
  if (key == "patch_t") return p.patch_t;
  if (key == "patch_hw") return p.patch_hw;
  if (key == "d_proj") return p.d_proj;
  if (key == "K") return p.K;
  if (key == "T") return p.T;
  if (key == "H") return p.H;
  if (key == "W") return p.W;
  return p.C;
}

EncoderParams alloc_from_meta(const std::map<std::string, std::string>& meta) {
  TrainConfig cfg;
  auto dim = [&](const char* key) {
    auto it = meta.find(key);
    check(it != meta.end(), std::string("checkpoint meta missing dim key ") + key);
    return static_cast<int>(parse_int(it->second, key));
  };
  cfg.d_model = dim("d_model");
  cfg.n_blocks = dim("n_blocks");
  cfg.n_heads = dim("n_heads");
  cfg.patch_t = dim("patch_t");
  cfg.patch_hw = dim("patch_hw");
  cfg.d_proj = dim("d_proj");
  cfg.K = dim("K");
  cfg.T = dim("T");
  cfg.H = dim("H");
  cfg.W = dim("W");
  cfg.C = dim("C");
  return make_encoder(cfg);
}

// ParamRef data is Eigen's column-major storage; element (i,j) sits at
// data[j*rows + i]. Payloads go to disk row-major.
void write_tensor(std::string& out, const ParamRef& ref) {
  put_str(out, ref.name);
  if (ref.cols == 1) {
    put_u32(out, 1);
    put_u64(out, static_cast<uint64_t>(ref.rows));
    for (Eigen::Index i = 0; i < ref.rows; ++i) put_f64(out, ref.data[i]);
  } else {
    put_u32(out, 2);
    put_u64(out, static_cast<uint64_t>(ref.rows));
    put_u64(out, static_cast<uint64_t>(ref.cols));
    for (Eigen::Index i = 0; i < ref.rows; ++i)
      for (Eigen::Index j = 0; j < ref.cols; ++j)
        put_f64(out, ref.data[j * ref.rows + i]);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& p,
                     const std::map<std::string, std::string>& meta) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);

  std::map<std::string, std::string> all_meta = meta;
  for (const char* key : kDimKeys) {
    check(meta.find(key) == meta.end(),
          std::string("checkpoint meta key is reserved: ") + key);
    all_meta[key] = std::to_string(dim_of(p, key));
  }
  put_u32(out, static_cast<uint32_t>(all_meta.size()));
  for (const auto& [k, v] : all_meta) {
    put_str(out, k);
    put_str(out, v);
  }

  auto refs = param_refs(const_cast<EncoderParams&>(p));
  put_u32(out, static_cast<uint32_t>(refs.size()));
  for (const auto& ref : refs) write_tensor(out, ref);

  write_binary_file(path, out.data(), out.size());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::vector<uint8_t> bytes = read_binary_file(path);
  Reader r{bytes.data(), bytes.size()};

  r.need(4);
  check(std::memcmp(r.p, kMagic, 4) == 0, "not a checkpoint file (bad magic)");
  r.p += 4;
  r.left -= 4;
  uint32_t version = r.u32();
  check(version == kVersion,
        "unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  uint32_t n_meta = r.u32();
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    ck.meta[k] = r.str();
  }

  ck.params = alloc_from_meta(ck.meta);
  for (const char* key : kDimKeys) ck.meta.erase(key);

  auto refs = param_refs(ck.params);
  std::map<std::string, const ParamRef*> by_name;
  for (const auto& ref : refs) by_name[ref.name] = &ref;

  uint32_t n_tensors = r.u32();
  check(n_tensors == refs.size(), "checkpoint tensor count mismatch");
  std::map<std::string, bool> seen;
  for (uint32_t t = 0; t < n_tensors; ++t) {
    std::string name = r.str();
    auto it = by_name.find(name);
    check(it != by_name.end(), "checkpoint has unknown tensor " + name);
    check(!seen[name], "checkpoint repeats tensor " + name);
    seen[name] = true;
    const ParamRef& ref = *it->second;

    uint32_t ndim = r.u32();
    if (ndim == 1) {
      check(ref.cols == 1, "tensor " + name + " is not a vector");
      uint64_t n = r.u64();
      check(n == static_cast<uint64_t>(ref.rows), "tensor " + name + " length mismatch");
      for (Eigen::Index i = 0; i < ref.rows; ++i) ref.data[i] = r.f64();
    } else if (ndim == 2) {
      uint64_t rows = r.u64();
      uint64_t cols = r.u64();
      check(rows == static_cast<uint64_t>(ref.rows) &&
                cols == static_cast<uint64_t>(ref.cols),
            "tensor " + name + " shape mismatch");
      for (Eigen::Index i = 0; i < ref.rows; ++i)
        for (Eigen::Index j = 0; j < ref.cols; ++j)
          ref.data[j * ref.rows + i] = r.f64();
    } else {
      throw Error("tensor " + name + " has unsupported rank " + std::to_string(ndim));
    }
  }
  check(r.left == 0, "checkpoint has trailing bytes");
  return ck;
}

CheckpointSummary summarize_checkpoint(const std::filesystem::path& path) {
  std::vector<uint8_t> bytes = read_binary_file(path);
  Reader r{bytes.data(), bytes.size()};

  r.need(4);
  check(std::memcmp(r.p, kMagic, 4) == 0, "not a checkpoint file (bad magic)");
  r.p += 4;
  r.left -= 4;

  CheckpointSummary s;
  s.version = r.u32();
  check(s.version == kVersion,
        "unsupported checkpoint version " + std::to_string(s.version));

  uint32_t n_meta = r.u32();
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    s.meta[k] = r.str();
  }

  uint32_t n_tensors = r.u32();
  for (uint32_t t = 0; t < n_tensors; ++t) {
    TensorSummary ts;
    ts.name = r.str();
    uint32_t ndim = r.u32();
    uint64_t count = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      uint64_t dim = r.u64();
      ts.dims.push_back(dim);
      count *= dim;
    }
    double sq = 0.0;
    for (uint64_t i = 0; i < count; ++i) {
      double x = r.f64();
      if (i == 0) {
        ts.min = ts.max = x;
      } else {
        ts.min = std::min(ts.min, x);
        ts.max = std::max(ts.max, x);
      }
      sq += x * x;
    }
    ts.l2 = std::sqrt(sq);
    s.n_scalars += static_cast<int64_t>(count);
    s.tensors.push_back(std::move(ts));
  }
  check(r.left == 0, "checkpoint has trailing bytes");
  return s;
}

}  // namespace cvda
