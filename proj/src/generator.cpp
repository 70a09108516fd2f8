// Copyright 2026 the cvda authors
// SPDX-License-Identifier: Apache-2.0
#include "cvda/generator.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cvda/config.hpp"
#include "cvda/error.hpp"
#include "cvda/io_util.hpp"
#include "cvda/rng.hpp"

namespace cvda {

namespace {

constexpr int kCoordsPerBlob = 4;

// Class-identity motion parameters. Unique orbit speed and size-ramp rate
// per class, with alternating rotation direction for variety.
struct ClassMotion {
  double speed;
  double direction;
  double ramp;
};

ClassMotion class_motion(int k, int K) {
  double frac = K > 1 ? static_cast<double>(k) / (K - 1) : 0.0;
  ClassMotion m;
  m.speed = 0.30 + 1.9 * frac;
  m.direction = (k % 2 == 0) ? 1.0 : -1.0;
  m.ramp = 1.1 * frac;
  return m;
}

// Event-level randomness: everything a clip of this event shares across
// views and modalities. Class identity must NOT leak in here.
struct EventParams {
  double center_x, center_y;  // orbit center, jittered around mid-frame
  double amp_jitter;
  struct Blob {
    double phase;
    double orbit;
    double sigma0;
    double amp0;
  };
  std::vector<Blob> blobs;
};

EventParams event_params(const GeneratorSpec& spec, int class_id, int event) {
  int n_blobs = spec.latent_dim / kCoordsPerBlob;
  Rng rng(derive_stream(spec.seed, "event",
                        static_cast<uint64_t>(class_id) * spec.n_clips_per_class +
                            event));
  EventParams ev;
  ev.center_x = 0.5 + rng.uniform(-0.04, 0.04);
  ev.center_y = 0.5 + rng.uniform(-0.04, 0.04);
  ev.amp_jitter = 1.0 + 0.03 * rng.normal();
  ev.blobs.resize(n_blobs);
  for (int m = 0; m < n_blobs; ++m) {
    EventParams::Blob& b = ev.blobs[m];
    b.phase = rng.uniform(0.0, 2.0 * M_PI);
    b.orbit = 0.16 + 0.09 * m + rng.uniform(-0.02, 0.02);
    b.sigma0 = 0.055 + 0.02 * m;
    b.amp0 = (0.95 - 0.1 * m) * ev.amp_jitter;
  }
  return ev;
}

// One blob's (cx, cy, sigma, amp) at frame t, untransformed coordinates.
void blob_state(const EventParams& ev, const ClassMotion& cm, int m, int t, int T,
                double out[kCoordsPerBlob]) {
  const EventParams::Blob& b = ev.blobs[m];
  double angle = b.phase + cm.direction * cm.speed * t;
  double ramp = 1.0 + cm.ramp * (T > 1 ? static_cast<double>(t) / (T - 1) : 0.0);
  out[0] = ev.center_x + b.orbit * std::cos(angle);
  out[1] = ev.center_y + b.orbit * std::sin(angle);
  out[2] = b.sigma0 * ramp;
  out[3] = b.amp0;
}

// Fixed blob colors; class identity stays out of the palette.
const double kBlobColor[2][3] = {{1.0, 0.62, 0.3}, {0.38, 0.78, 1.0}};

Mat default_view_bias(int H, int W, double fx, double fy, double px, double py,
                      double amp) {
  Mat bias(H, W);
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w) {
      double x = (w + 0.5) / W;
      double y = (h + 0.5) / H;
      bias(h, w) = amp * std::sin(2.0 * M_PI * (fx * x + px)) *
                   std::cos(2.0 * M_PI * (fy * y + py));
    }
  return bias;
}

std::string clip_basename(int class_id, int event, int view, int modality) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "c%d_e%03d_%s_%s.bin", class_id, event,
                view_name(view).c_str(), modality_name(modality).c_str());
  return std::string("clips/") + buf;
}

// Renders one clip: latent blobs -> view warp -> view bias -> channel mix ->
// gain -> noise -> clamp to [0,1]. The warp is applied analytically to blob
// centers and widths (rotation + uniform scale keeps Gaussians Gaussian),
// so there are no resampling artifacts.
Clip render_clip(const GeneratorSpec& spec, int class_id, int event,
                 const ViewTransform& vt, const ModalityTransform& mt,
                 double noise_sigma, uint64_t noise_stream) {
  const int T = spec.T, H = spec.H, W = spec.W, C = spec.C;
  const int n_blobs = spec.latent_dim / kCoordsPerBlob;
  const ClassMotion cm = class_motion(class_id, spec.K);
  const EventParams ev = event_params(spec, class_id, event);

  const double cr = std::cos(vt.rot), sr = std::sin(vt.rot);

  Clip clip;
  clip.T = T;
  clip.H = H;
  clip.W = W;
  clip.C = C;
  clip.data.resize(clip.size());
  clip.class_id = class_id;
  clip.view = vt.view;
  clip.modality = mt.modality;

  std::vector<double> base(C), mixed(C);
  for (int t = 0; t < T; ++t) {
    // Transformed blob parameters for this frame.
    std::vector<double> bx(n_blobs), by(n_blobs), bs(n_blobs), ba(n_blobs);
    for (int m = 0; m < n_blobs; ++m) {
      double st[kCoordsPerBlob];
      blob_state(ev, cm, m, t, T, st);
      double dx = st[0] - 0.5, dy = st[1] - 0.5;
      bx[m] = 0.5 + vt.scale * (cr * dx - sr * dy) + vt.tx;
      by[m] = 0.5 + vt.scale * (sr * dx + cr * dy) + vt.ty;
      bs[m] = vt.scale * st[2];
      ba[m] = st[3];
    }
    for (int h = 0; h < H; ++h) {
      double y = (h + 0.5) / H;
      for (int w = 0; w < W; ++w) {
        double x = (w + 0.5) / W;
        std::fill(base.begin(), base.end(), 0.0);
        for (int m = 0; m < n_blobs; ++m) {
          double d2 = (x - bx[m]) * (x - bx[m]) + (y - by[m]) * (y - by[m]);
          double g = ba[m] * std::exp(-d2 / (2.0 * bs[m] * bs[m]));
          for (int c = 0; c < C; ++c) base[c] += g * kBlobColor[m % 2][c];
        }
        if (vt.view_bias.size() > 0) {
          double vb = vt.view_bias(h, w);
          for (int c = 0; c < C; ++c) base[c] += vb;
        }
        for (int c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int c2 = 0; c2 < C; ++c2) acc += mt.channel_map(c, c2) * base[c2];
          mixed[c] = mt.gain * acc;
        }
        for (int c = 0; c < C; ++c)
          clip.at(t, h, w, c) = static_cast<float>(mixed[c]);
      }
    }
  }

  Rng noise(noise_stream);
  for (auto& v : clip.data) {
    double x = v;
    if (noise_sigma > 0.0) x += noise_sigma * noise.normal();
    v = static_cast<float>(std::clamp(x, 0.0, 1.0));
  }
  return clip;
}

// Shared assembly: renders every event through the given per-view and
// per-modality transforms and builds the matching manifest.
Corpus assemble(const GeneratorSpec& spec, const std::vector<ViewTransform>& views,
                const std::vector<ModalityTransform>& modalities,
                double noise_floor) {
  const int n_views = static_cast<int>(views.size());
  const int gap = 4;

  Corpus out;
  out.manifest.n_views = n_views;
  out.manifest.class_names.clear();
  for (int k = 0; k < spec.K; ++k)
    out.manifest.class_names.push_back("class" + std::to_string(k));

  // (view, modality) slots per event: all views through the source
  // modality, then the anchor view through the target modality.
  std::vector<std::pair<const ViewTransform*, const ModalityTransform*>> slots;
  const ModalityTransform* source = nullptr;
  const ModalityTransform* target = nullptr;
  for (const auto& mt : modalities)
    (mt.modality == kModSource ? source : target) = &mt;
  for (const auto& vt : views) slots.push_back({&vt, source});
  slots.push_back({&views.front(), target});

  uint64_t clip_index = 0;
  for (int k = 0; k < spec.K; ++k) {
    for (int e = 0; e < spec.n_clips_per_class; ++e) {
      int64_t start = static_cast<int64_t>(e) * (spec.T + gap);
      int64_t end = start + spec.T;
      for (const auto& [vt, mt] : slots) {
        double sigma = noise_floor + mt->noise_sigma_extra;
        Clip clip = render_clip(spec, k, e, *vt, *mt, sigma,
                                derive_stream(spec.seed, "noise", clip_index));
        clip.clip_id = clip_basename(k, e, vt->view, mt->modality);
        clip.start_frame = start;
        clip.end_frame = end;
        out.clips.push_back(std::move(clip));

        SampleRecord rec;
        rec.clip_ref = out.clips.back().clip_id;
        rec.view = vt->view;
        rec.modality = mt->modality;
        rec.class_id = k;
        rec.start_frame = start;
        rec.end_frame = end;
        out.manifest.records.push_back(rec);
        ++clip_index;
      }
    }
  }
  return out;
}

}  // namespace

GeneratorSpec default_generator_spec(int K, int n_clips_per_class, uint64_t seed) {
  GeneratorSpec spec;
  spec.K = K;
  spec.n_clips_per_class = n_clips_per_class;
  spec.seed = seed;
  rebuild_standard_tables(spec);
  return spec;
}

void rebuild_standard_tables(GeneratorSpec& spec) {
  // V1 is the pristine anchor. V2/V3 are moderately warped positives. V4 is
  // held out of training: a fresh warp inside the family the positives span,
  // so view-invariant features can reach it while anchor-only training
  // cannot.
  ViewTransform v1;
  v1.view = 1;
  ViewTransform v2;
  v2.view = 2;
  v2.rot = 0.20;
  v2.tx = 0.04;
  v2.ty = -0.03;
  v2.scale = 1.06;
  v2.view_bias = default_view_bias(spec.H, spec.W, 2, 1, 0.3, 0.1, 0.05);
  ViewTransform v3;
  v3.view = 3;
  v3.rot = -0.16;
  v3.tx = -0.03;
  v3.ty = 0.04;
  v3.scale = 0.95;
  v3.view_bias = default_view_bias(spec.H, spec.W, 1, 2, 0.6, 0.4, 0.05);
  ViewTransform v4;
  v4.view = 4;
  v4.rot = 0.10;
  v4.tx = 0.05;
  v4.ty = -0.04;
  v4.scale = 1.08;
  v4.view_bias = default_view_bias(spec.H, spec.W, 2, 1, 0.45, 0.1, 0.06);
  spec.views = {v1, v2, v3, v4};

  ModalityTransform ma;
  ma.modality = kModSource;
  ma.channel_map = Mat::Identity(spec.C, spec.C);
  ModalityTransform mb;
  mb.modality = kModTarget;
  if (spec.C == 3) {
    mb.channel_map.resize(3, 3);
    mb.channel_map << 0.66, 0.22, 0.12,  //
        0.17, 0.66, 0.17,                //
        0.12, 0.22, 0.66;
  } else if (spec.C >= 1) {
    // Diagonally dominant mixing for nonstandard channel counts; always
    // full rank because the off-diagonal mass per row stays below 0.62.
    mb.channel_map = 0.62 * Mat::Identity(spec.C, spec.C) +
                     (0.38 / spec.C) * Mat::Ones(spec.C, spec.C);
  }
  mb.gain = 1.10;
  mb.noise_sigma_extra = 0.015;
  spec.modalities = {ma, mb};
}

std::vector<std::string> validate_generator_spec(const GeneratorSpec& spec) {
  std::vector<std::string> bad;
  if (spec.K < 2) bad.push_back("K must be >= 2");
  if (spec.n_clips_per_class < 1) bad.push_back("n_clips_per_class must be >= 1");
  if (spec.noise_sigma < 0.0) bad.push_back("noise_sigma must be >= 0");
  if (spec.latent_dim != 4 && spec.latent_dim != 8)
    bad.push_back("latent_dim must be 4 or 8 (4 coordinates per blob)");
  if (spec.shift_magnitude < 0.0) bad.push_back("shift_magnitude must be >= 0");
  if (spec.T < 1 || spec.H < 1 || spec.W < 1 || spec.C < 1)
    bad.push_back("clip dims must be positive");

  if (spec.views.size() < 3) {
    bad.push_back("at least 3 views are required");
  } else {
    std::vector<int> ids;
    for (const auto& vt : spec.views) ids.push_back(vt.view);
    std::vector<int> want(ids.size());
    for (size_t i = 0; i < want.size(); ++i) want[i] = static_cast<int>(i) + 1;
    if (ids != want)
      bad.push_back("views must be numbered 1..n in order (one anchor, one held-out)");
  }
  for (const auto& vt : spec.views) {
    if (vt.scale == 0.0)
      bad.push_back("view " + view_name(vt.view) + " scale must be nonzero");
    if (vt.view_bias.size() > 0 &&
        (vt.view_bias.rows() != spec.H || vt.view_bias.cols() != spec.W))
      bad.push_back("view " + view_name(vt.view) + " bias must be H x W");
  }

  if (spec.modalities.size() != 2) {
    bad.push_back("exactly 2 modalities are required (one source, one target)");
  } else {
    int n_src = 0, n_tgt = 0;
    for (const auto& mt : spec.modalities) {
      if (mt.modality == kModSource) ++n_src;
      if (mt.modality == kModTarget) ++n_tgt;
    }
    if (n_src != 1 || n_tgt != 1)
      bad.push_back("modalities must contain exactly one source and one target");
  }
  for (const auto& mt : spec.modalities) {
    if (mt.gain <= 0.0)
      bad.push_back("modality " + modality_name(mt.modality) + " gain must be > 0");
    if (mt.noise_sigma_extra < 0.0)
      bad.push_back("modality " + modality_name(mt.modality) +
                    " noise_sigma_extra must be >= 0");
    if (mt.channel_map.rows() != spec.C || mt.channel_map.cols() != spec.C ||
        std::fabs(mt.channel_map.determinant()) < 1e-9)
      bad.push_back("modality " + modality_name(mt.modality) +
                    " channel_map must be C x C with full row rank");
  }
  return bad;
}

void require_valid(const GeneratorSpec& spec) {
  auto bad = validate_generator_spec(spec);
  if (bad.empty()) return;
  std::string msg = "invalid generator spec:";
  for (const auto& b : bad) msg += "\n  - " + b;
  throw Error(msg);
}

Corpus generate_corpus(const GeneratorSpec& spec) {
  require_valid(spec);
  return assemble(spec, spec.views, spec.modalities, spec.noise_sigma);
}

Corpus generate_foreign_corpus(const GeneratorSpec& spec, uint64_t shift_seed) {
  require_valid(spec);
  const double mag = spec.shift_magnitude;

  std::vector<ViewTransform> views = spec.views;
  for (auto& vt : views) {
    Rng rng(derive_stream(shift_seed, "shift-view", vt.view));
    vt.rot += mag * rng.uniform(-0.25, 0.25);
    vt.tx += mag * rng.uniform(-0.08, 0.08);
    vt.ty += mag * rng.uniform(-0.08, 0.08);
    vt.scale *= 1.0 + mag * rng.uniform(-0.15, 0.15);
    double fx = 1.0 + rng.index(3);
    double fy = 1.0 + rng.index(3);
    double px = rng.uniform();
    double py = rng.uniform();
    double amp = rng.uniform(0.03, 0.07);
    Mat fresh = default_view_bias(spec.H, spec.W, fx, fy, px, py, amp);
    if (vt.view_bias.size() == 0) vt.view_bias = Mat::Zero(spec.H, spec.W);
    vt.view_bias = (1.0 - mag) * vt.view_bias + mag * fresh;
  }

  std::vector<ModalityTransform> modalities = spec.modalities;
  for (auto& mt : modalities) {
    Rng rng(derive_stream(shift_seed, "shift-modality",
                          static_cast<uint64_t>(mt.modality)));
    Mat delta(spec.C, spec.C);
    for (Eigen::Index i = 0; i < delta.size(); ++i)
      delta.data()[i] = rng.uniform(-0.15, 0.15);
    mt.channel_map += mag * delta;
    if (std::fabs(mt.channel_map.determinant()) < 1e-6)
      mt.channel_map += 0.1 * Mat::Identity(spec.C, spec.C);
    mt.gain *= 1.0 + mag * rng.uniform(-0.15, 0.25);
    mt.noise_sigma_extra += mag * 0.015;
  }

  return assemble(spec, views, modalities, spec.noise_sigma * (1.0 + mag));
}

Mat latent_path(const GeneratorSpec& spec, int class_id, int event) {
  require_valid(spec);
  check(class_id >= 0 && class_id < spec.K, "latent_path: class out of range");
  check(event >= 0 && event < spec.n_clips_per_class,
        "latent_path: event out of range");
  const int n_blobs = spec.latent_dim / kCoordsPerBlob;
  const ClassMotion cm = class_motion(class_id, spec.K);
  const EventParams ev = event_params(spec, class_id, event);
  Mat path(spec.T, spec.latent_dim);
  for (int t = 0; t < spec.T; ++t)
    for (int m = 0; m < n_blobs; ++m) {
      double st[kCoordsPerBlob];
      blob_state(ev, cm, m, t, spec.T, st);
      for (int c = 0; c < kCoordsPerBlob; ++c)
        path(t, m * kCoordsPerBlob + c) = st[c];
    }
  return path;
}

void save_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& p) {
  std::string text;
  text += "K = " + std::to_string(spec.K) + "\n";
  text += "n_clips_per_class = " + std::to_string(spec.n_clips_per_class) + "\n";
  text += "noise_sigma = " + fmt_double(spec.noise_sigma) + "\n";
  text += "latent_dim = " + std::to_string(spec.latent_dim) + "\n";
  text += "seed = " + std::to_string(spec.seed) + "\n";
  text += "shift_magnitude = " + fmt_double(spec.shift_magnitude) + "\n";
  text += "T = " + std::to_string(spec.T) + "\n";
  text += "H = " + std::to_string(spec.H) + "\n";
  text += "W = " + std::to_string(spec.W) + "\n";
  text += "C = " + std::to_string(spec.C) + "\n";
  write_text_file(p, text);
}

GeneratorSpec load_generator_spec(const std::filesystem::path& p) {
  GeneratorSpec spec;
  auto int_field = [&](const std::string& v, const std::string& key) {
    return static_cast<int>(parse_int(v, key));
  };
  for (const auto& [key, value] : parse_kv_file(p)) {
    if (key == "K")
      spec.K = int_field(value, key);
    else if (key == "n_clips_per_class")
      spec.n_clips_per_class = int_field(value, key);
    else if (key == "noise_sigma")
      spec.noise_sigma = parse_double(value, key);
    else if (key == "latent_dim")
      spec.latent_dim = int_field(value, key);
    else if (key == "seed")
      spec.seed = static_cast<uint64_t>(parse_int(value, key));
    else if (key == "shift_magnitude")
      spec.shift_magnitude = parse_double(value, key);
    else if (key == "T")
      spec.T = int_field(value, key);
    else if (key == "H")
      spec.H = int_field(value, key);
    else if (key == "W")
      spec.W = int_field(value, key);
    else if (key == "C")
      spec.C = int_field(value, key);
    else
      throw Error(p.string() + ": unknown generator spec key '" + key + "'");
  }
  rebuild_standard_tables(spec);
  require_valid(spec);
  return spec;
}

void save_corpus(const Corpus& corpus, const GeneratorSpec& spec,
                 const std::filesystem::path& dir) {
  check(corpus.clips.size() == corpus.manifest.records.size(),
        "save_corpus: clips and manifest records disagree");
  std::filesystem::create_directories(dir);
  save_generator_spec(spec, dir / "spec.txt");
  save_manifest(corpus.manifest, dir / "manifest.tsv");
  for (size_t i = 0; i < corpus.clips.size(); ++i) {
    std::filesystem::path p = dir / corpus.manifest.records[i].clip_ref;
    std::filesystem::create_directories(p.parent_path());
    save_clip_payload(corpus.clips[i], p);
  }
}

Corpus load_corpus(const std::filesystem::path& dir, bool unlabeled_targets) {
  GeneratorSpec spec = load_generator_spec(dir / "spec.txt");
  Manifest m = load_manifest(dir / "manifest.tsv");
  if (unlabeled_targets) {
    Manifest u = load_manifest_unlabeled(dir / "manifest.tsv");
    for (size_t i = 0; i < m.records.size(); ++i)
      if (m.records[i].modality == kModTarget) m.records[i] = u.records[i];
  }
  Corpus corpus;
  corpus.manifest = std::move(m);
  corpus.clips.reserve(corpus.manifest.records.size());
  for (const auto& rec : corpus.manifest.records)
    corpus.clips.push_back(load_clip(dir, rec, spec.T, spec.H, spec.W, spec.C));
  return corpus;
}

}  // namespace cvda
