#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fft/geometry.hpp"

namespace fft {

// Dense per-pixel displacement field between two frames, row-major grids of
// horizontal (u) and vertical (v) components in pixels per frame pair.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int width_, int height_)
      : width(width_),
        height(height_),
        u(checked_cells(width_, height_), 0.0f),
        v(u.size(), 0.0f) {}
  FlowField(int width_, int height_, std::vector<float> u_, std::vector<float> v_)
      : width(width_), height(height_), u(std::move(u_)), v(std::move(v_)) {
    if (width_ <= 0 || height_ <= 0) throw std::invalid_argument("FlowField: non-positive size");
    const std::size_t n = static_cast<std::size_t>(width_) * height_;
    if (u.size() != n || v.size() != n) throw std::invalid_argument("FlowField: grid size mismatch");
  }

  // validates before the vectors size themselves in the init list
  static std::size_t checked_cells(int w, int h) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("FlowField: non-positive size");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  float u_at(int x, int y) const { return u[index(x, y)]; }
  float v_at(int x, int y) const { return v[index(x, y)]; }
  float& u_at(int x, int y) { return u[index(x, y)]; }
  float& v_at(int x, int y) { return v[index(x, y)]; }
};

enum class ScaleMode { none, affine_fit };

struct MotionEstimatorConfig {
  // Fraction of the box shrunk on each side before pooling, in [0, 0.5).
  double inner_margin_ratio = 0.1;
  // Minimum number of pooled grid cells; below this the estimate fails.
  int min_pixels = 16;
  ScaleMode scale_mode = ScaleMode::affine_fit;
};

namespace detail {

inline double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Least squares y = a + s * xi over the samples; returns {intercept, slope}.
// A zero-variance predictor degenerates to {mean, 0}.
inline std::pair<double, double> fit_line(const std::vector<double>& xi,
                                          const std::vector<double>& y) {
  const double n = static_cast<double>(xi.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    mx += xi[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double dx = xi[i] - mx;
    sxx += dx * dx;
    sxy += dx * (y[i] - my);
  }
  if (sxx <= 0.0) return {my, 0.0};
  const double slope = sxy / sxx;
  return {my - slope * mx, slope};
}

}  // namespace detail

// Pools the flow inside a target box into one Motion estimate.
//
// The box is shrunk by inner_margin_ratio on every side and all grid cells
// whose center falls inside the shrunken region are sampled (no
// interpolation). Translation comes from the component-wise median; in
// affine_fit mode the per-axis least-squares slope against the offset from
// the box center yields (dw, dh) and the intercepts at the center replace
// (dx, dy). Returns nullopt when fewer than min_pixels cells are covered;
// the caller falls back to zero motion.
inline std::optional<Motion> pool_motion(const FlowField& flow, const BBox& b,
                                         const MotionEstimatorConfig& cfg) {
  if (!(cfg.inner_margin_ratio >= 0.0 && cfg.inner_margin_ratio < 0.5))
    throw std::invalid_argument("pool_motion: inner_margin_ratio outside [0, 0.5)");
  if (cfg.min_pixels < 1) throw std::invalid_argument("pool_motion: min_pixels must be >= 1");

  const double r = cfg.inner_margin_ratio;
  const double x0 = b.x + r * b.w, x1 = b.right() - r * b.w;
  const double y0 = b.y + r * b.h, y1 = b.bottom() - r * b.h;

  // Cells with center (i + 0.5, j + 0.5) inside [x0, x1) x [y0, y1).
  const int ix0 = std::max(0, static_cast<int>(std::ceil(x0 - 0.5)));
  const int ix1 = std::min(flow.width, static_cast<int>(std::ceil(x1 - 0.5)));
  const int iy0 = std::max(0, static_cast<int>(std::ceil(y0 - 0.5)));
  const int iy1 = std::min(flow.height, static_cast<int>(std::ceil(y1 - 0.5)));

  const std::int64_t count =
      std::max<std::int64_t>(0, ix1 - ix0) * std::max<std::int64_t>(0, iy1 - iy0);
  if (count < cfg.min_pixels) return std::nullopt;

  std::vector<double> us, vs;
  us.reserve(count);
  vs.reserve(count);
  for (int j = iy0; j < iy1; ++j)
    for (int i = ix0; i < ix1; ++i) {
      us.push_back(flow.u_at(i, j));
      vs.push_back(flow.v_at(i, j));
    }

  if (cfg.scale_mode == ScaleMode::none) {
    const double dx = detail::median_inplace(us);
    const double dy = detail::median_inplace(vs);
    return Motion(dx, dy, 0.0, 0.0);
  }

  // affine_fit: u against x-offset from the box center, v against y-offset.
  std::vector<double> xs, ys;
  xs.reserve(count);
  ys.reserve(count);
  for (int j = iy0; j < iy1; ++j)
    for (int i = ix0; i < ix1; ++i) {
      xs.push_back(i + 0.5 - b.cx());
      ys.push_back(j + 0.5 - b.cy());
    }
  const auto [ax, sx] = detail::fit_line(xs, us);
  const auto [ay, sy] = detail::fit_line(ys, vs);
  return Motion(ax, ay, sx * b.w, sy * b.h);
}

// Advances every target by its pooled motion, falling back to zero motion
// when too little flow is covered. Ids, scores and order are preserved;
// boxes are clipped to the flow extent.
inline std::vector<Target> flow_targets(const FlowField& flow, std::span<const Target> targets,
                                        const MotionEstimatorConfig& cfg) {
  const double fw = flow.width, fh = flow.height;
  std::vector<Target> out;
  out.reserve(targets.size());
  for (const Target& t : targets) {
    const BBox sample_box = clip_to_frame(t.box, fw, fh);
    Motion m;
    if (!sample_box.degenerate())
      if (auto pooled = pool_motion(flow, sample_box, cfg)) m = *pooled;
    const BBox moved = clip_to_frame(apply_motion(t.box, m), fw, fh);
    out.emplace_back(moved, t.id, t.score, t.frame);
  }
  return out;
}

// Squared Frobenius norm of the stacked motion difference; the regression
// diagnostic for a motion estimator against ground-truth motions.
inline double motion_regression_error(std::span<const Motion> predicted,
                                      std::span<const Motion> truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("motion_regression_error: length mismatch");
  double e = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double ddx = predicted[i].dx - truth[i].dx;
    const double ddy = predicted[i].dy - truth[i].dy;
    const double ddw = predicted[i].dw - truth[i].dw;
    const double ddh = predicted[i].dh - truth[i].dh;
    e += ddx * ddx + ddy * ddy + ddw * ddw + ddh * ddh;
  }
  return e;
}

}  // namespace fft
