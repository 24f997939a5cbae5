#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fft/geometry.hpp"

namespace fft {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image(int width_, int height_)
      : width(width_), height(height_), rgb(checked_bytes(width_, height_), 0) {}

  // validates before the pixel buffer sizes itself in the init list
  static std::size_t checked_bytes(int w, int h) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("Image: non-positive size");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  }

  void set(int x, int y, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = c.r;
    rgb[i + 1] = c.g;
    rgb[i + 2] = c.b;
  }

  Rgb at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

namespace detail {

inline Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (h < 60) {
    r = c; g = x;
  } else if (h < 120) {
    r = x; g = c;
  } else if (h < 180) {
    g = c; b = x;
  } else if (h < 240) {
    g = x; b = c;
  } else if (h < 300) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  const auto byte = [m](double q) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(q + m, 0.0, 1.0) * 255.0));
  };
  return {byte(r), byte(g), byte(b)};
}

}  // namespace detail

// 64 well-separated colors; ids map in cyclically, so any 64 consecutive ids
// render distinctly.
inline const std::array<Rgb, 64>& id_palette() {
  static const std::array<Rgb, 64> palette = [] {
    std::array<Rgb, 64> p{};
    for (int i = 0; i < 64; ++i) p[i] = detail::hsv_to_rgb(i * (360.0 / 64.0), 0.85, 1.0);
    return p;
  }();
  return palette;
}

inline Rgb color_for_id(std::int64_t id) {
  return id_palette()[static_cast<std::size_t>(((id % 64) + 64) % 64)];
}

// Draws a 2-pixel box outline per target onto a black frame.
inline Image render_frame(int width, int height, std::span<const Target> targets) {
  Image img(width, height);
  constexpr int kThickness = 2;
  for (const Target& t : targets) {
    const Rgb c = color_for_id(t.id);
    const int x0 = std::clamp(static_cast<int>(std::lround(t.box.x)), 0, width);
    const int y0 = std::clamp(static_cast<int>(std::lround(t.box.y)), 0, height);
    const int x1 = std::clamp(static_cast<int>(std::lround(t.box.right())), 0, width);
    const int y1 = std::clamp(static_cast<int>(std::lround(t.box.bottom())), 0, height);
    if (x1 <= x0 || y1 <= y0) continue;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const bool edge = x - x0 < kThickness || x1 - 1 - x < kThickness ||
                          y - y0 < kThickness || y1 - 1 - y < kThickness;
        if (edge) img.set(x, y, c);
      }
  }
  return img;
}

// Binary portable pixmap.
inline std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

}  // namespace fft
