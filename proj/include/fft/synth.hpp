#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fft/error.hpp"
#include "fft/flow.hpp"
#include "fft/geometry.hpp"
#include "fft/mot_io.hpp"
#include "fft/pipeline.hpp"
#include "fft/trajectory.hpp"

namespace fft {

// One synthetic target: center-anchored constant velocity with a
// multiplicative per-frame size change.
struct TargetSpec {
  BBox init;
  double vx = 0.0;
  double vy = 0.0;
  double scale_rate = 1.0;
  // Inclusive frame windows during which the target emits no detection.
  std::vector<std::pair<std::int64_t, std::int64_t>> occlusions;
};

struct SynthSpec {
  std::string name = "synth";
  std::int64_t frames = 1;
  int width = 64;
  int height = 64;
  std::uint64_t seed = 1;
  // Lookback flows are generated for depths 2..max_lookback; 1 means none.
  int max_lookback = 1;
  double background_u = 0.0;
  double background_v = 0.0;
  double center_jitter_std = 0.0;
  double size_jitter_std = 0.0;
  double score_min = 1.0;
  double score_max = 1.0;
  double fp_rate = 0.0;
  double miss_rate = 0.0;
  std::vector<TargetSpec> targets;

  void validate() const {
    if (frames < 1) throw SpecError("frames must be >= 1");
    if (width < 8 || height < 8) throw SpecError("frame size must be at least 8x8");
    if (max_lookback < 1) throw SpecError("max_lookback must be >= 1");
    if (!(score_min >= 0.0 && score_min <= score_max && score_max <= 1.0))
      throw SpecError("score range must satisfy 0 <= score_min <= score_max <= 1");
    if (!(miss_rate >= 0.0 && miss_rate <= 1.0)) throw SpecError("miss_rate must lie in [0, 1]");
    if (!(fp_rate >= 0.0)) throw SpecError("fp_rate must be >= 0");
    if (!(center_jitter_std >= 0.0) || !(size_jitter_std >= 0.0))
      throw SpecError("jitter stds must be >= 0");
    for (const TargetSpec& t : targets) {
      if (t.init.w <= 0.0 || t.init.h <= 0.0) throw SpecError("target boxes need positive area");
      if (!(t.scale_rate > 0.0)) throw SpecError("scale_rate must be > 0");
      for (const auto& [from, to] : t.occlusions)
        if (from < 0 || to < from || to >= frames)
          throw SpecError("occlusion window outside the frame range");
    }
  }
};

// Ground-truth kinematics, exact for every frame (no accumulation).
inline BBox gt_box(const SynthSpec& spec, std::size_t target, std::int64_t t) {
  const TargetSpec& ts = spec.targets.at(target);
  const double s = std::pow(ts.scale_rate, static_cast<double>(t));
  const double w = ts.init.w * s;
  const double h = ts.init.h * s;
  const double cx = ts.init.cx() + ts.vx * static_cast<double>(t);
  const double cy = ts.init.cy() + ts.vy * static_cast<double>(t);
  return BBox(cx - w / 2.0, cy - h / 2.0, w, h);
}

// Motion of a target between two frames in center/size terms:
// (dcx, dcy, dw, dh).
inline Motion composed_motion(const SynthSpec& spec, std::size_t target, std::int64_t from,
                              std::int64_t to) {
  const BBox a = gt_box(spec, target, from);
  const BBox b = gt_box(spec, target, to);
  return Motion(b.cx() - a.cx(), b.cy() - a.cy(), b.w - a.w, b.h - a.h);
}

inline bool is_occluded(const TargetSpec& ts, std::int64_t t) {
  for (const auto& [from, to] : ts.occlusions)
    if (t >= from && t <= to) return true;
  return false;
}

struct SynthTruth {
  TrajectorySet gt;
  std::map<std::int64_t, std::vector<Detection>> detections;
};

// Ground truth plus detections corrupted by the spec's noise model. All
// randomness is consumed here in one fixed order, so truth generation is
// deterministic per seed and flow generation below stays draw-free.
inline SynthTruth generate_truth(const SynthSpec& spec) {
  spec.validate();
  SynthTruth out;
  std::mt19937_64 rng(spec.seed);

  for (std::size_t k = 0; k < spec.targets.size(); ++k)
    for (std::int64_t t = 0; t < spec.frames; ++t)
      out.gt.add_entry(static_cast<std::int64_t>(k) + 1, t, gt_box(spec, k, t), 1.0);

  const auto draw_score = [&rng, &spec]() {
    if (spec.score_min == spec.score_max) return spec.score_min;
    return std::uniform_real_distribution<double>(spec.score_min, spec.score_max)(rng);
  };

  for (std::int64_t t = 0; t < spec.frames; ++t) {
    std::vector<Detection>& dets = out.detections[t];
    for (std::size_t k = 0; k < spec.targets.size(); ++k) {
      if (is_occluded(spec.targets[k], t)) continue;
      if (spec.miss_rate > 0.0 &&
          std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.miss_rate)
        continue;
      const BBox b = gt_box(spec, k, t);
      double cx = b.cx(), cy = b.cy(), w = b.w, h = b.h;
      if (spec.center_jitter_std > 0.0) {
        cx += std::normal_distribution<double>(0.0, spec.center_jitter_std)(rng);
        cy += std::normal_distribution<double>(0.0, spec.center_jitter_std)(rng);
      }
      if (spec.size_jitter_std > 0.0) {
        w = std::max(1.0, w + std::normal_distribution<double>(0.0, spec.size_jitter_std)(rng));
        h = std::max(1.0, h + std::normal_distribution<double>(0.0, spec.size_jitter_std)(rng));
      }
      dets.emplace_back(BBox(cx - w / 2.0, cy - h / 2.0, w, h), draw_score());
    }
    if (spec.fp_rate > 0.0) {
      const int n = std::poisson_distribution<int>(spec.fp_rate)(rng);
      for (int i = 0; i < n; ++i) {
        const double w =
            std::uniform_real_distribution<double>(8.0, std::max(10.0, spec.width / 5.0))(rng);
        const double h =
            std::uniform_real_distribution<double>(8.0, std::max(10.0, spec.height / 5.0))(rng);
        const double x = std::uniform_real_distribution<double>(0.0, spec.width - w)(rng);
        const double y = std::uniform_real_distribution<double>(0.0, spec.height - h)(rng);
        dets.emplace_back(BBox(x, y, w, h), draw_score());
      }
    }
  }
  return out;
}

// Analytic displacement field from frame t-depth to frame t: inside each
// target's box at t-depth the flow is that target's exact motion (affine when
// the target scales), elsewhere the background motion. Overlapping boxes are
// resolved by nearest box center.
inline FlowField make_flow(const SynthSpec& spec, std::int64_t t, int depth) {
  if (depth < 1 || t - depth < 0) throw SpecError("flow pair outside the sequence");
  FlowField field(spec.width, spec.height);
  std::fill(field.u.begin(), field.u.end(), static_cast<float>(spec.background_u));
  std::fill(field.v.begin(), field.v.end(), static_cast<float>(spec.background_v));

  std::vector<float> dist2(field.u.size(), std::numeric_limits<float>::infinity());
  for (std::size_t k = 0; k < spec.targets.size(); ++k) {
    const BBox prev = gt_box(spec, k, t - depth);
    const BBox cur = gt_box(spec, k, t);
    if (prev.w <= 0.0 || prev.h <= 0.0) continue;
    const double sx = cur.w / prev.w;
    const double sy = cur.h / prev.h;
    const double dcx = cur.cx() - prev.cx();
    const double dcy = cur.cy() - prev.cy();

    const int ix0 = std::max(0, static_cast<int>(std::ceil(prev.x - 0.5)));
    const int ix1 = std::min(spec.width, static_cast<int>(std::ceil(prev.right() - 0.5)));
    const int iy0 = std::max(0, static_cast<int>(std::ceil(prev.y - 0.5)));
    const int iy1 = std::min(spec.height, static_cast<int>(std::ceil(prev.bottom() - 0.5)));
    for (int j = iy0; j < iy1; ++j)
      for (int i = ix0; i < ix1; ++i) {
        const double px = i + 0.5, py = j + 0.5;
        const double ox = px - prev.cx(), oy = py - prev.cy();
        const float d2 = static_cast<float>(ox * ox + oy * oy);
        const std::size_t idx = field.index(i, j);
        if (d2 >= dist2[idx]) continue;
        dist2[idx] = d2;
        field.u[idx] = static_cast<float>(dcx + (sx - 1.0) * ox);
        field.v[idx] = static_cast<float>(dcy + (sy - 1.0) * oy);
      }
  }
  return field;
}

inline FrameBundle make_bundle(const SynthSpec& spec, const SynthTruth& truth, std::int64_t t) {
  FrameBundle bundle;
  bundle.frame = t;
  if (const auto it = truth.detections.find(t); it != truth.detections.end())
    bundle.detections = it->second;
  if (t >= 1) bundle.flow_prev = make_flow(spec, t, 1);
  for (int d = 2; d <= spec.max_lookback && t - d >= 0; ++d)
    bundle.lookback_flows.emplace(d, make_flow(spec, t, d));
  return bundle;
}

struct SynthData {
  SynthTruth truth;
  std::vector<FrameBundle> bundles;
};

// Fully materialized sequence; fine for small frames. Large runs should pair
// generate_truth with make_bundle to keep one frame in memory at a time.
inline SynthData generate(const SynthSpec& spec) {
  SynthData data;
  data.truth = generate_truth(spec);
  data.bundles.reserve(static_cast<std::size_t>(spec.frames));
  for (std::int64_t t = 0; t < spec.frames; ++t)
    data.bundles.push_back(make_bundle(spec, data.truth, t));
  return data;
}

// Augmentation jitter: size ratios in [0.85, 1.15], center shifts within
// +/-0.15 of each dimension, resampled until the jittered box keeps IoU > 0.8
// with the original.
struct JitterResult {
  BBox box;
  int draws = 0;
  bool fell_back = false;
  double scale_w = 1.0;
  double scale_h = 1.0;
  double shift_x_ratio = 0.0;
  double shift_y_ratio = 0.0;
};

inline BBox jitter_candidate(const BBox& b, double scale_w, double scale_h, double shift_x_ratio,
                             double shift_y_ratio) {
  const double w = b.w * scale_w;
  const double h = b.h * scale_h;
  const double cx = b.cx() + shift_x_ratio * b.w;
  const double cy = b.cy() + shift_y_ratio * b.h;
  return BBox(cx - w / 2.0, cy - h / 2.0, w, h);
}

inline JitterResult jitter_result(const BBox& b, std::uint64_t seed, int max_draws = 1000) {
  if (b.w <= 0.0 || b.h <= 0.0) throw std::invalid_argument("jitter: box needs positive area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> scale(0.85, 1.15);
  std::uniform_real_distribution<double> shift(-0.15, 0.15);
  JitterResult res;
  while (res.draws < max_draws) {
    ++res.draws;
    const double sw = scale(rng), sh = scale(rng);
    const double rx = shift(rng), ry = shift(rng);
    const BBox cand = jitter_candidate(b, sw, sh, rx, ry);
    if (iou(b, cand) > 0.8) {
      res.box = cand;
      res.scale_w = sw;
      res.scale_h = sh;
      res.shift_x_ratio = rx;
      res.shift_y_ratio = ry;
      return res;
    }
  }
  res.box = b;
  res.fell_back = true;
  return res;
}

inline BBox jitter(const BBox& b, std::uint64_t seed) { return jitter_result(b, seed).box; }

inline const std::vector<int>& default_pair_rates() {
  static const std::vector<int> rates = {1, 3, 5, 10, 15, 20, 25, 30};
  return rates;
}

// All frame pairs (t, t+r) for each sampling rate, in rate order.
inline std::vector<std::pair<std::int64_t, std::int64_t>> pair_sampling(
    std::int64_t frames, const std::vector<int>& rates = default_pair_rates()) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const int r : rates) {
    if (r < 1) throw std::invalid_argument("pair_sampling: rates must be >= 1");
    for (std::int64_t t = 0; t + r < frames; ++t) out.emplace_back(t, t + r);
  }
  return out;
}

// Key-value synthetic spec text. Repeated `target = x y w h vx vy scale_rate`
// lines add targets; `occlude = index from to` attaches a detection-dropout
// window to a target by index.
inline SynthSpec parse_synth_spec(std::string_view text) {
  SynthSpec spec;
  std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>> occlusions;

  for (const detail::Line& line : detail::lines_of(text)) {
    std::string_view t = line.text;
    if (const std::size_t hash = t.find('#'); hash != std::string_view::npos) t = t.substr(0, hash);
    t = detail::trim(t);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(line.number, "expected key = value, got '" + std::string(t) + "'");
    const std::string_view key = detail::trim(t.substr(0, eq));
    const std::string_view value = detail::trim(t.substr(eq + 1));

    const auto fields = [&value]() {
      std::vector<std::string_view> out;
      std::size_t pos = 0;
      while (pos < value.size()) {
        while (pos < value.size() && (value[pos] == ' ' || value[pos] == '\t')) ++pos;
        if (pos >= value.size()) break;
        std::size_t end = pos;
        while (end < value.size() && value[end] != ' ' && value[end] != '\t') ++end;
        out.push_back(value.substr(pos, end - pos));
        pos = end;
      }
      return out;
    };

    if (key == "name") {
      spec.name = std::string(value);
    } else if (key == "frames") {
      spec.frames = detail::parse_int(value, line.number, "frames");
    } else if (key == "width") {
      spec.width = static_cast<int>(detail::parse_int(value, line.number, "width"));
    } else if (key == "height") {
      spec.height = static_cast<int>(detail::parse_int(value, line.number, "height"));
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(detail::parse_int(value, line.number, "seed"));
    } else if (key == "max_lookback") {
      spec.max_lookback = static_cast<int>(detail::parse_int(value, line.number, "max_lookback"));
    } else if (key == "background_u") {
      spec.background_u = detail::parse_double(value, line.number, "background_u");
    } else if (key == "background_v") {
      spec.background_v = detail::parse_double(value, line.number, "background_v");
    } else if (key == "center_jitter_std") {
      spec.center_jitter_std = detail::parse_double(value, line.number, "center_jitter_std");
    } else if (key == "size_jitter_std") {
      spec.size_jitter_std = detail::parse_double(value, line.number, "size_jitter_std");
    } else if (key == "score_min") {
      spec.score_min = detail::parse_double(value, line.number, "score_min");
    } else if (key == "score_max") {
      spec.score_max = detail::parse_double(value, line.number, "score_max");
    } else if (key == "fp_rate") {
      spec.fp_rate = detail::parse_double(value, line.number, "fp_rate");
    } else if (key == "miss_rate") {
      spec.miss_rate = detail::parse_double(value, line.number, "miss_rate");
    } else if (key == "target") {
      const auto f = fields();
      if (f.size() != 7)
        throw ParseError(line.number, "target needs 7 fields: x y w h vx vy scale_rate");
      TargetSpec ts;
      const double x = detail::parse_double(f[0], line.number, "target x");
      const double y = detail::parse_double(f[1], line.number, "target y");
      const double w = detail::parse_double(f[2], line.number, "target w");
      const double h = detail::parse_double(f[3], line.number, "target h");
      if (w <= 0.0 || h <= 0.0) throw ParseError(line.number, "target boxes need positive area");
      ts.init = BBox(x, y, w, h);
      ts.vx = detail::parse_double(f[4], line.number, "target vx");
      ts.vy = detail::parse_double(f[5], line.number, "target vy");
      ts.scale_rate = detail::parse_double(f[6], line.number, "target scale_rate");
      spec.targets.push_back(ts);
    } else if (key == "occlude") {
      const auto f = fields();
      if (f.size() != 3) throw ParseError(line.number, "occlude needs 3 fields: index from to");
      occlusions.emplace_back(detail::parse_int(f[0], line.number, "occlude index"),
                              detail::parse_int(f[1], line.number, "occlude from"),
                              detail::parse_int(f[2], line.number, "occlude to"));
    } else {
      throw ParseError(line.number, "unknown key '" + std::string(key) + "'");
    }
  }

  for (const auto& [idx, from, to] : occlusions) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= spec.targets.size())
      throw SpecError("occlude index " + std::to_string(idx) + " has no target");
    spec.targets[static_cast<std::size_t>(idx)].occlusions.emplace_back(from, to);
  }
  spec.validate();
  return spec;
}

}  // namespace fft
