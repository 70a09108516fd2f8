// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "cvda/error.hpp"
#include "cvda/io_util.hpp"

namespace cvda {

std::vector<std::pair<std::string, std::string>> parse_kv_file(
    const std::filesystem::path& p) {
  std::vector<std::pair<std::string, std::string>> kv;
  auto lines = split_lines(read_text_file(p));
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    check(eq != std::string::npos,
          p.string() + ":" + std::to_string(i + 1) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    check(!key.empty(), p.string() + ":" + std::to_string(i + 1) + ": empty key");
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

std::vector<std::string> validate_config(const TrainConfig& c) {
  std::vector<std::string> v;
  auto bad = [&](const std::string& msg) { v.push_back(msg); };

  if (c.K < 2) bad("K must be >= 2");
  if (c.T < 1) bad("T must be >= 1");
  if (c.H < 1) bad("H must be >= 1");
  if (c.W < 1) bad("W must be >= 1");
  if (c.C < 1) bad("C must be >= 1");
  if (c.d_model < 1) bad("d_model must be >= 1");
  if (c.n_blocks < 1) bad("n_blocks must be >= 1");
  if (c.n_heads < 1) bad("n_heads must be >= 1");
  if (c.n_heads >= 1 && c.d_model >= 1 && c.d_model % c.n_heads != 0)
    bad("d_model must be divisible by n_heads");
  if (c.patch_t < 1) bad("patch_t must be >= 1");
  if (c.patch_hw < 1) bad("patch_hw must be >= 1");
  if (c.patch_t >= 1 && c.T >= 1 && c.T % c.patch_t != 0)
    bad("T must be divisible by patch_t");
  if (c.patch_hw >= 1 && c.H >= 1 && c.H % c.patch_hw != 0)
    bad("H must be divisible by patch_hw");
  if (c.patch_hw >= 1 && c.W >= 1 && c.W % c.patch_hw != 0)
    bad("W must be divisible by patch_hw");
  if (c.d_proj < 1) bad("d_proj must be >= 1");
  if (!(c.tau > 0.0)) bad("tau must be > 0");
  if (!(c.lambda1 >= 0.0)) bad("lambda1 must be >= 0");
  if (!(c.alpha >= 0.0)) bad("alpha must be >= 0");
  if (!(c.lambda_offdiag >= 0.0)) bad("lambda_offdiag must be >= 0");
  if (!(c.lr_phase1 > 0.0)) bad("lr_phase1 must be > 0");
  if (!(c.lr_phase2 > 0.0)) bad("lr_phase2 must be > 0");
  if (!(c.weight_decay >= 0.0)) bad("weight_decay must be >= 0");
  if (c.epochs_phase1 < 1) bad("epochs_phase1 must be >= 1");
  if (c.epochs_phase2 < 1) bad("epochs_phase2 must be >= 1");
  if (c.batch_phase1 < 1) bad("batch_phase1 must be >= 1");
  if (c.batch_phase2 < 1) bad("batch_phase2 must be >= 1");
  if (!(c.freeze_fraction >= 0.0 && c.freeze_fraction <= 1.0))
    bad("freeze_fraction ∈ [0,1]");
  if (c.queue_capacity < 1) bad("queue_capacity must be >= 1");
  if (c.pairs_per_target < 1) bad("pairs_per_target must be >= 1");
  if (!(c.pseudo_conf_threshold >= 0.0 && c.pseudo_conf_threshold <= 1.0))
    bad("pseudo_conf_threshold ∈ [0,1]");
  return v;
}

void require_valid(const TrainConfig& cfg) {
  auto v = validate_config(cfg);
  if (v.empty()) return;
  std::string msg = "invalid config:";
  for (const auto& s : v) msg += "\n  " + s;
  throw Error(msg);
}

namespace {

// One table drives load, save, and the unknown-key check.
struct Field {
  const char* key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

std::vector<Field> config_fields() {
  auto int_field = [](const char* key, int TrainConfig::* m) {
    return Field{
        key,
        [key, m](TrainConfig& c, const std::string& s) {
          c.*m = static_cast<int>(parse_int(s, key));
        },
        [m](const TrainConfig& c) { return std::to_string(c.*m); },
    };
  };
  auto dbl_field = [](const char* key, double TrainConfig::* m) {
    return Field{
        key,
        [key, m](TrainConfig& c, const std::string& s) { c.*m = parse_double(s, key); },
        [m](const TrainConfig& c) { return fmt_double(c.*m); },
    };
  };
  std::vector<Field> f;
  f.push_back(int_field("K", &TrainConfig::K));
  f.push_back(int_field("T", &TrainConfig::T));
  f.push_back(int_field("H", &TrainConfig::H));
  f.push_back(int_field("W", &TrainConfig::W));
  f.push_back(int_field("C", &TrainConfig::C));
  f.push_back(int_field("d_model", &TrainConfig::d_model));
  f.push_back(int_field("n_blocks", &TrainConfig::n_blocks));
  f.push_back(int_field("n_heads", &TrainConfig::n_heads));
  f.push_back(int_field("patch_t", &TrainConfig::patch_t));
  f.push_back(int_field("patch_hw", &TrainConfig::patch_hw));
  f.push_back(int_field("d_proj", &TrainConfig::d_proj));
  f.push_back(dbl_field("tau", &TrainConfig::tau));
  f.push_back(dbl_field("lambda1", &TrainConfig::lambda1));
  f.push_back(dbl_field("alpha", &TrainConfig::alpha));
  f.push_back(dbl_field("lambda_offdiag", &TrainConfig::lambda_offdiag));
  f.push_back(dbl_field("lr_phase1", &TrainConfig::lr_phase1));
  f.push_back(dbl_field("lr_phase2", &TrainConfig::lr_phase2));
  f.push_back(dbl_field("weight_decay", &TrainConfig::weight_decay));
  f.push_back(int_field("epochs_phase1", &TrainConfig::epochs_phase1));
  f.push_back(int_field("epochs_phase2", &TrainConfig::epochs_phase2));
  f.push_back(int_field("batch_phase1", &TrainConfig::batch_phase1));
  f.push_back(int_field("batch_phase2", &TrainConfig::batch_phase2));
  f.push_back(dbl_field("freeze_fraction", &TrainConfig::freeze_fraction));
  f.push_back(int_field("queue_capacity", &TrainConfig::queue_capacity));
  f.push_back(int_field("pairs_per_target", &TrainConfig::pairs_per_target));
  f.push_back(dbl_field("pseudo_conf_threshold", &TrainConfig::pseudo_conf_threshold));
  f.push_back(Field{
      "seed",
      [](TrainConfig& c, const std::string& s) {
        c.seed = static_cast<uint64_t>(parse_int(s, "seed"));
      },
      [](const TrainConfig& c) { return std::to_string(c.seed); },
  });
  return f;
}

}  // namespace

TrainConfig load_train_config(const std::filesystem::path& p) {
  TrainConfig cfg;
  auto fields = config_fields();
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields) by_key[f.key] = &f;

  for (const auto& [key, value] : parse_kv_file(p)) {
    auto it = by_key.find(key);
    check(it != by_key.end(), p.string() + ": unknown config key '" + key + "'");
    it->second->set(cfg, value);
  }
  return cfg;
}

void save_train_config(const TrainConfig& cfg, const std::filesystem::path& p) {
  std::ostringstream out;
  for (const auto& f : config_fields()) out << f.key << " = " << f.get(cfg) << "\n";
  write_text_file(p, out.str());
}

}  // namespace cvda
