#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fft {

// Axis-aligned box (left, top, width, height) in pixels, 0-based continuous
// coordinates. Extents are never negative; zero-area boxes are legal values
// (the pipeline filters them before matching). The 1-based MOT file
// convention is converted at the I/O boundary only.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  BBox() = default;
  BBox(double x_, double y_, double w_, double h_) : x(x_), y(y_), w(w_), h(h_) {
    if (!(std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h)))
      throw std::invalid_argument("BBox: non-finite field");
    if (w < 0.0 || h < 0.0) throw std::invalid_argument("BBox: negative extent");
  }

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w * h; }
  bool degenerate() const { return w <= 0.0 || h <= 0.0; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Per-target displacement over one frame pair: (dx, dy) move the box, and
// (dw, dh) change its extents.
struct Motion {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;

  Motion() = default;
  Motion(double dx_, double dy_, double dw_, double dh_) : dx(dx_), dy(dy_), dw(dw_), dh(dh_) {
    if (!(std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dw) && std::isfinite(dh)))
      throw std::invalid_argument("Motion: non-finite field");
  }

  Motion negated() const { return Motion(-dx, -dy, -dw, -dh); }

  friend bool operator==(const Motion&, const Motion&) = default;
};

inline void check_score(double score, const char* what) {
  if (!(score >= 0.0 && score <= 1.0))  // also rejects NaN
    throw std::invalid_argument(std::string(what) + ": score outside [0, 1]");
}

// Detector output: box plus confidence, no identity.
struct Detection {
  BBox box;
  double score = 0.0;

  Detection() = default;
  Detection(const BBox& box_, double score_) : box(box_), score(score_) {
    check_score(score, "Detection");
  }
};

// Tracked box: box plus trajectory id, confidence and frame index.
struct Target {
  BBox box;
  std::int64_t id = 1;
  double score = 0.0;
  std::int64_t frame = 0;

  Target() = default;
  Target(const BBox& box_, std::int64_t id_, double score_, std::int64_t frame_)
      : box(box_), id(id_), score(score_), frame(frame_) {
    if (id < 1) throw std::invalid_argument("Target: id must be >= 1");
    if (frame < 0) throw std::invalid_argument("Target: negative frame");
    check_score(score, "Target");
  }
};

// Intersection over union. Returns 0 when the union has zero area.
inline double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  // near-identical boxes can round the union below the intersection
  return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

// Component-wise box update; extents are clamped at zero from below.
inline BBox apply_motion(const BBox& b, const Motion& m) {
  return BBox(b.x + m.dx, b.y + m.dy, std::max(0.0, b.w + m.dw), std::max(0.0, b.h + m.dh));
}

// Intersect a box with [0, width] x [0, height]. The result may be a
// degenerate zero-area box when the input lies outside the frame.
inline BBox clip_to_frame(const BBox& b, double width, double height) {
  if (!(width > 0.0) || !(height > 0.0))
    throw std::invalid_argument("clip_to_frame: non-positive frame size");
  const double x0 = std::clamp(b.x, 0.0, width);
  const double x1 = std::clamp(b.right(), 0.0, width);
  const double y0 = std::clamp(b.y, 0.0, height);
  const double y1 = std::clamp(b.bottom(), 0.0, height);
  return BBox(x0, y0, x1 - x0, y1 - y0);
}

}  // namespace fft
