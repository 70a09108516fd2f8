// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/optim.hpp"

#include <cmath>
#include <cstring>

#include "cvda/error.hpp"
#include "cvda/io_util.hpp"

namespace cvda {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'O', 'S'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& out, double x) {
  uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  put_u64(out, bits);
}

void put_str(std::vector<uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void put_mat(std::vector<uint8_t>& out, const Mat& m) {
  put_u64(out, static_cast<uint64_t>(m.rows()));
  put_u64(out, static_cast<uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}

struct Reader {
  const uint8_t* p;
  size_t left;

  void need(size_t n) const {
    if (left < n) throw Error("optimizer state file truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    p += 4, left -= 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    p += 8, left -= 8;
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double x;
    std::memcpy(&x, &bits, sizeof x);
    return x;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n, left -= n;
    return s;
  }
  Mat mat() {
    const auto rows = static_cast<Eigen::Index>(u64());
    const auto cols = static_cast<Eigen::Index>(u64());
    if (rows < 0 || cols < 0 || rows > (1 << 24) || cols > (1 << 24))
      throw Error("optimizer state tensor shape is implausible");
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f64();
    return m;
  }
};

}  // namespace

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs < 1) throw Error("cosine_lr: total_epochs must be >= 1");
  if (epoch < 0 || epoch > total_epochs)
    throw Error("cosine_lr: epoch out of [0, total_epochs]");
  return base_lr * 0.5 *
         (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                         static_cast<double>(total_epochs)));
}

Adam::Adam(const std::vector<ParamRef>& working_set, const AdamConfig& cfg)
    : cfg_(cfg) {
  if (working_set.empty()) throw Error("optimizer working set is empty");
  slots_.reserve(working_set.size());
  for (const ParamRef& r : working_set) {
    slots_.push_back({r.name, Mat::Zero(r.rows, r.cols), Mat::Zero(r.rows, r.cols)});
  }
}

void Adam::step(const std::vector<ParamRef>& params,
                const std::vector<ParamRef>& grads, double lr) {
  if (params.size() != slots_.size() || grads.size() != slots_.size())
    throw Error("optimizer step working set size changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < slots_.size(); ++i) {
    Slot& s = slots_[i];
    if (params[i].name != s.name || grads[i].name != s.name)
      throw Error("optimizer step parameter registry mismatch at " + s.name);
    if (params[i].rows != s.m.rows() || params[i].cols != s.m.cols())
      throw Error("optimizer step shape mismatch at " + s.name);
    Eigen::Map<Mat> theta(params[i].data, params[i].rows, params[i].cols);
    Eigen::Map<const Mat> g0(grads[i].data, grads[i].rows, grads[i].cols);

    Mat g = g0 + cfg_.weight_decay * theta;
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * g;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    theta.array() -=
        lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + cfg_.eps);
  }
}

void Adam::save(const std::filesystem::path& path) const {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u64(out, static_cast<uint64_t>(t_));
  put_f64(out, cfg_.beta1);
  put_f64(out, cfg_.beta2);
  put_f64(out, cfg_.eps);
  put_f64(out, cfg_.weight_decay);
  put_u32(out, static_cast<uint32_t>(slots_.size()));
  for (const Slot& s : slots_) {
    put_str(out, s.name);
    put_mat(out, s.m);
    put_mat(out, s.v);
  }
  write_binary_file(path, out.data(), out.size());
}

Adam Adam::load(const std::filesystem::path& path,
                const std::vector<ParamRef>& working_set) {
  const std::vector<uint8_t> bytes = read_binary_file(path);
  Reader r{bytes.data(), bytes.size()};
  r.need(4);
  if (std::memcmp(r.p, kMagic, 4) != 0)
    throw Error("optimizer state magic mismatch in " + path.string());
  r.p += 4, r.left -= 4;
  if (r.u32() != kVersion)
    throw Error("unsupported optimizer state version in " + path.string());

  const auto t = static_cast<int64_t>(r.u64());
  AdamConfig cfg;
  cfg.beta1 = r.f64();
  cfg.beta2 = r.f64();
  cfg.eps = r.f64();
  cfg.weight_decay = r.f64();

  Adam out(working_set, cfg);
  out.t_ = t;
  const uint32_t n = r.u32();
  if (n != out.slots_.size())
    throw Error("optimizer state slot count does not match the working set");
  for (Slot& s : out.slots_) {
    const std::string name = r.str();
    if (name != s.name)
      throw Error("optimizer state names " + name + " where the working set has " +
                  s.name);
    Mat m = r.mat();
    Mat v = r.mat();
    if (m.rows() != s.m.rows() || m.cols() != s.m.cols() ||
        v.rows() != s.v.rows() || v.cols() != s.v.cols())
      throw Error("optimizer state shape mismatch at " + s.name);
    s.m = std::move(m);
    s.v = std::move(v);
  }
  if (r.left != 0) throw Error("trailing bytes in optimizer state file");
  return out;
}

}  // namespace cvda
