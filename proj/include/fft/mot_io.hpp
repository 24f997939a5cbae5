#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fft/error.hpp"
#include "fft/flow.hpp"
#include "fft/geometry.hpp"
#include "fft/pipeline.hpp"
#include "fft/trajectory.hpp"

namespace fft {

struct SeqInfo {
  std::string name;
  int width = 0;
  int height = 0;
  double frame_rate = 0.0;
  std::int64_t seq_length = 0;
};

// Parsed detection file plus the score-normalization record: when any raw
// score falls outside [0, 1] the whole sequence is min-max rescaled.
struct DetectionData {
  std::map<std::int64_t, std::vector<Detection>> by_frame;
  bool normalized = false;
  double raw_min = 0.0;
  double raw_max = 0.0;
};

namespace detail {

struct Line {
  std::size_t number;  // 1-based
  std::string_view text;
};

inline std::vector<Line> lines_of(std::string_view text) {
  std::vector<Line> out;
  std::size_t number = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line =
        nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    ++number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const bool blank = line.find_first_not_of(" \t") == std::string_view::npos;
    if (!blank) out.push_back({number, line});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = s.find(sep, pos);
    if (c == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, c - pos));
    pos = c + 1;
  }
}

inline double parse_double(std::string_view field, std::size_t line, const std::string& what) {
  const std::string_view s = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value))
    throw ParseError(line, what + " is not a finite number: '" + std::string(field) + "'");
  return value;
}

inline std::int64_t parse_int(std::string_view field, std::size_t line, const std::string& what) {
  const std::string_view s = trim(field);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError(line, what + " is not an integer: '" + std::string(field) + "'");
  return value;
}

// Coordinates are written with 2 fractional digits, then trailing zeros (and
// a bare dot) are trimmed, so integral values print bare.
inline std::string format_coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

inline std::string format_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct RawBoxRow {
  std::size_t line;
  std::int64_t frame;
  BBox box;
};

// Shared frame/x/y/w/h handling for all MOT-style CSV rows: 1-based file
// convention converted to 0-based here and nowhere else.
inline RawBoxRow parse_box_fields(const std::vector<std::string_view>& fields, std::size_t line) {
  const std::int64_t frame = parse_int(fields[0], line, "frame");
  if (frame < 1) throw ParseError(line, "frame must be >= 1");
  const double x = parse_double(fields[2], line, "x");
  const double y = parse_double(fields[3], line, "y");
  const double w = parse_double(fields[4], line, "w");
  const double h = parse_double(fields[5], line, "h");
  if (w < 0.0 || h < 0.0) throw ParseError(line, "negative box extent");
  return {line, frame - 1, BBox(x - 1.0, y - 1.0, w, h)};
}

}  // namespace detail

// Detection file rows: frame, -1, x, y, w, h, score[, ...]. Rows are grouped
// by 0-based frame; raw out-of-range scores trigger per-sequence min-max
// normalization (an all-equal sequence maps to 1.0).
inline DetectionData parse_detections(std::string_view text) {
  struct Row {
    std::int64_t frame;
    BBox box;
    double score;
  };
  std::vector<Row> rows;
  bool out_of_range = false;
  double lo = 0.0, hi = 0.0;

  for (const detail::Line& line : detail::lines_of(text)) {
    const auto fields = detail::split(line.text, ',');
    if (fields.size() < 7)
      throw ParseError(line.number, "expected at least 7 fields, got " +
                                        std::to_string(fields.size()));
    const detail::RawBoxRow base = detail::parse_box_fields(fields, line.number);
    const double score = detail::parse_double(fields[6], line.number, "score");
    if (rows.empty()) {
      lo = hi = score;
    } else {
      lo = std::min(lo, score);
      hi = std::max(hi, score);
    }
    if (score < 0.0 || score > 1.0) out_of_range = true;
    rows.push_back({base.frame, base.box, score});
  }

  DetectionData out;
  out.normalized = out_of_range;
  out.raw_min = lo;
  out.raw_max = hi;
  for (const Row& r : rows) {
    double s = r.score;
    if (out_of_range) s = hi > lo ? (r.score - lo) / (hi - lo) : 1.0;
    out.by_frame[r.frame].emplace_back(r.box, s);
  }
  return out;
}

// Ground-truth rows: frame, id, x, y, w, h, flag, class, visibility[, ...].
// Inactive rows, filtered classes, and low-visibility rows are dropped; an
// empty class filter accepts every class.
inline TrajectorySet parse_ground_truth(std::string_view text,
                                        const std::set<std::int64_t>& class_filter = {},
                                        double min_visibility = 0.0) {
  TrajectorySet set;
  for (const detail::Line& line : detail::lines_of(text)) {
    const auto fields = detail::split(line.text, ',');
    if (fields.size() < 9)
      throw ParseError(line.number, "expected at least 9 fields, got " +
                                        std::to_string(fields.size()));
    const detail::RawBoxRow base = detail::parse_box_fields(fields, line.number);
    const std::int64_t id = detail::parse_int(fields[1], line.number, "id");
    if (id < 1) throw ParseError(line.number, "id must be >= 1");
    const std::int64_t flag = detail::parse_int(fields[6], line.number, "active flag");
    const std::int64_t cls = detail::parse_int(fields[7], line.number, "class");
    const double vis = detail::parse_double(fields[8], line.number, "visibility");
    if (flag == 0) continue;
    if (!class_filter.empty() && !class_filter.count(cls)) continue;
    if (vis < min_visibility) continue;
    try {
      set.add_entry(id, base.frame, base.box, 1.0);
    } catch (const std::logic_error&) {
      throw ParseError(line.number, "duplicate entry for id " + std::to_string(id) +
                                        " at frame " + std::to_string(base.frame + 1));
    }
  }
  return set;
}

// Tracker result rows: frame, id, x, y, w, h, score[, ...].
inline TrajectorySet parse_results(std::string_view text) {
  TrajectorySet set;
  for (const detail::Line& line : detail::lines_of(text)) {
    const auto fields = detail::split(line.text, ',');
    if (fields.size() < 7)
      throw ParseError(line.number, "expected at least 7 fields, got " +
                                        std::to_string(fields.size()));
    const detail::RawBoxRow base = detail::parse_box_fields(fields, line.number);
    const std::int64_t id = detail::parse_int(fields[1], line.number, "id");
    if (id < 1) throw ParseError(line.number, "id must be >= 1");
    const double score = detail::parse_double(fields[6], line.number, "score");
    if (score < 0.0 || score > 1.0) throw ParseError(line.number, "score outside [0, 1]");
    try {
      set.add_entry(id, base.frame, base.box, score);
    } catch (const std::logic_error&) {
      throw ParseError(line.number, "duplicate entry for id " + std::to_string(id) +
                                        " at frame " + std::to_string(base.frame + 1));
    }
  }
  return set;
}

// MOTChallenge submission format: frame,id,x,y,w,h,score,-1,-1,-1 with
// 1-based frames and coordinates, sorted by frame then id.
inline std::string write_results(const TrajectorySet& set) {
  struct Row {
    std::int64_t frame, id;
    const TrackPoint* point;
  };
  std::vector<Row> rows;
  for (const auto& [id, trk] : set.tracks())
    for (const auto& [frame, point] : trk.entries()) rows.push_back({frame, id, &point});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  std::string out;
  for (const Row& r : rows) {
    out += std::to_string(r.frame + 1) + ',' + std::to_string(r.id) + ',';
    out += detail::format_coord(r.point->box.x + 1.0) + ',';
    out += detail::format_coord(r.point->box.y + 1.0) + ',';
    out += detail::format_coord(r.point->box.w) + ',';
    out += detail::format_coord(r.point->box.h) + ',';
    out += detail::format_score(r.point->score) + ",-1,-1,-1\n";
  }
  return out;
}

// Detection file format, the inverse of parse_detections for in-range scores.
inline std::string write_detections(const std::map<std::int64_t, std::vector<Detection>>& dets) {
  std::string out;
  for (const auto& [frame, list] : dets)
    for (const Detection& d : list) {
      out += std::to_string(frame + 1) + ",-1,";
      out += detail::format_coord(d.box.x + 1.0) + ',';
      out += detail::format_coord(d.box.y + 1.0) + ',';
      out += detail::format_coord(d.box.w) + ',';
      out += detail::format_coord(d.box.h) + ',';
      out += detail::format_score(d.score) + ",-1,-1,-1\n";
    }
  return out;
}

// Ground-truth format with active flag 1, class 1, full visibility.
inline std::string write_ground_truth(const TrajectorySet& set) {
  struct Row {
    std::int64_t frame, id;
    const TrackPoint* point;
  };
  std::vector<Row> rows;
  for (const auto& [id, trk] : set.tracks())
    for (const auto& [frame, point] : trk.entries()) rows.push_back({frame, id, &point});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  std::string out;
  for (const Row& r : rows) {
    out += std::to_string(r.frame + 1) + ',' + std::to_string(r.id) + ',';
    out += detail::format_coord(r.point->box.x + 1.0) + ',';
    out += detail::format_coord(r.point->box.y + 1.0) + ',';
    out += detail::format_coord(r.point->box.w) + ',';
    out += detail::format_coord(r.point->box.h) + ",1,1,1\n";
  }
  return out;
}

// File-backed refiner rows: frame, x, y, w, h, score (1-based frame and
// coordinates, like every other text format here).
inline std::map<std::int64_t, std::vector<Detection>> parse_refiner_csv(std::string_view text) {
  std::map<std::int64_t, std::vector<Detection>> out;
  for (const detail::Line& line : detail::lines_of(text)) {
    const auto fields = detail::split(line.text, ',');
    if (fields.size() < 6)
      throw ParseError(line.number, "expected at least 6 fields, got " +
                                        std::to_string(fields.size()));
    const std::int64_t frame = detail::parse_int(fields[0], line.number, "frame");
    if (frame < 1) throw ParseError(line.number, "frame must be >= 1");
    const double x = detail::parse_double(fields[1], line.number, "x");
    const double y = detail::parse_double(fields[2], line.number, "y");
    const double w = detail::parse_double(fields[3], line.number, "w");
    const double h = detail::parse_double(fields[4], line.number, "h");
    if (w < 0.0 || h < 0.0) throw ParseError(line.number, "negative box extent");
    const double score = detail::parse_double(fields[5], line.number, "score");
    if (score < 0.0 || score > 1.0) throw ParseError(line.number, "score outside [0, 1]");
    out[frame - 1].emplace_back(BBox(x - 1.0, y - 1.0, w, h), score);
  }
  return out;
}

inline constexpr float kFlowMagic = 202021.25f;

// Middlebury-style container: magic float, int32 width, int32 height, then
// row-major interleaved (u, v) float pairs, all little-endian.
inline FlowField read_flow(std::span<const unsigned char> bytes) {
  const auto get_f32 = [&bytes](std::size_t off) {
    float f;
    std::memcpy(&f, bytes.data() + off, 4);
    return f;
  };
  const auto get_i32 = [&bytes](std::size_t off) {
    std::int32_t i;
    std::memcpy(&i, bytes.data() + off, 4);
    return i;
  };

  if (bytes.size() < 4) throw FlowError(FlowErrorKind::truncated, "missing magic");
  const float magic = get_f32(0);
  if (!(magic == kFlowMagic)) throw FlowError(FlowErrorKind::bad_magic, "");
  if (bytes.size() < 12) throw FlowError(FlowErrorKind::truncated, "missing dimensions");
  const std::int32_t w = get_i32(4);
  const std::int32_t h = get_i32(8);
  if (w <= 0 || h <= 0 || w > 100000 || h > 100000 ||
      static_cast<std::int64_t>(w) * h > 50'000'000)
    throw FlowError(FlowErrorKind::bad_dims,
                    std::to_string(w) + "x" + std::to_string(h));
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t expected = 12 + count * 8;
  if (bytes.size() < expected)
    throw FlowError(FlowErrorKind::truncated, "expected " + std::to_string(expected) +
                                                  " bytes, got " + std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw FlowError(FlowErrorKind::trailing_data,
                    std::to_string(bytes.size() - expected) + " extra bytes");

  FlowField field(w, h);
  for (std::size_t i = 0; i < count; ++i) {
    const float u = get_f32(12 + 8 * i);
    const float v = get_f32(16 + 8 * i);
    if (!std::isfinite(u) || !std::isfinite(v))
      throw FlowError(FlowErrorKind::non_finite, "at vector " + std::to_string(i));
    field.u[i] = u;
    field.v[i] = v;
  }
  return field;
}

inline std::vector<unsigned char> write_flow(const FlowField& field) {
  const std::size_t count = field.u.size();
  std::vector<unsigned char> bytes(12 + count * 8);
  const auto put_f32 = [&bytes](std::size_t off, float f) { std::memcpy(bytes.data() + off, &f, 4); };
  const auto put_i32 = [&bytes](std::size_t off, std::int32_t i) {
    std::memcpy(bytes.data() + off, &i, 4);
  };
  put_f32(0, kFlowMagic);
  put_i32(4, field.width);
  put_i32(8, field.height);
  for (std::size_t i = 0; i < count; ++i) {
    put_f32(12 + 8 * i, field.u[i]);
    put_f32(16 + 8 * i, field.v[i]);
  }
  return bytes;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline FlowField read_flow_file(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  return read_flow(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

inline void write_flow_file(const std::filesystem::path& path, const FlowField& field) {
  const std::vector<unsigned char> bytes = write_flow(field);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Flow files are named by 1-based frame numbers: the field from frame t-d to
// frame t (0-based) lives in "<t+1>_<t+1-d>.flo".
inline std::string flow_file_name(std::int64_t t, int depth) {
  return std::to_string(t + 1) + "_" + std::to_string(t + 1 - depth) + ".flo";
}

// Assembles one frame's inputs from a flow directory; absent lookback files
// are skipped, an absent previous-frame file leaves flow_prev unset.
inline FrameBundle load_frame_bundle(const std::filesystem::path& flow_dir, std::int64_t t,
                                     int bt_frames,
                                     const std::map<std::int64_t, std::vector<Detection>>& dets) {
  FrameBundle bundle;
  bundle.frame = t;
  if (const auto it = dets.find(t); it != dets.end()) bundle.detections = it->second;
  if (t >= 1) {
    const std::filesystem::path p = flow_dir / flow_file_name(t, 1);
    if (std::filesystem::exists(p)) bundle.flow_prev = read_flow_file(p);
  }
  for (int d = 2; d <= bt_frames; ++d) {
    if (t - d < 0) break;
    const std::filesystem::path p = flow_dir / flow_file_name(t, d);
    if (std::filesystem::exists(p)) bundle.lookback_flows.emplace(d, read_flow_file(p));
  }
  return bundle;
}

// MOTChallenge seqinfo.ini; section headers and unrelated keys are ignored.
inline SeqInfo parse_seqinfo(std::string_view text) {
  SeqInfo info;
  bool saw_width = false, saw_height = false, saw_rate = false, saw_length = false;
  for (const detail::Line& line : detail::lines_of(text)) {
    const std::string_view t = detail::trim(line.text);
    if (t.empty() || t.front() == '[' || t.front() == ';' || t.front() == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(line.number, "expected key=value, got '" + std::string(t) + "'");
    const std::string_view key = detail::trim(t.substr(0, eq));
    const std::string_view value = detail::trim(t.substr(eq + 1));
    if (key == "name") {
      info.name = std::string(value);
    } else if (key == "imWidth") {
      info.width = static_cast<int>(detail::parse_int(value, line.number, "imWidth"));
      saw_width = true;
    } else if (key == "imHeight") {
      info.height = static_cast<int>(detail::parse_int(value, line.number, "imHeight"));
      saw_height = true;
    } else if (key == "frameRate") {
      info.frame_rate = detail::parse_double(value, line.number, "frameRate");
      saw_rate = true;
    } else if (key == "seqLength") {
      info.seq_length = detail::parse_int(value, line.number, "seqLength");
      saw_length = true;
    }
  }
  if (!saw_width || !saw_height || !saw_rate || !saw_length)
    throw ParseError(0, "seqinfo missing imWidth/imHeight/frameRate/seqLength");
  if (info.width <= 0 || info.height <= 0 || info.frame_rate <= 0.0 || info.seq_length <= 0)
    throw ParseError(0, "seqinfo dimensions, frame rate and length must be positive");
  return info;
}

struct ConfigOverrides {
  std::optional<double> thresh_score;
  std::optional<double> thresh_iou;
  std::optional<double> thresh_nms;
  std::optional<int> bt_frames;
};

// Key-value pipeline config text; '#' starts a comment.
inline void apply_config_text(PipelineConfig& cfg, std::string_view text) {
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
    if (key == "thresh_score") {
      cfg.fuse.thresh_score = detail::parse_double(value, line.number, "thresh_score");
    } else if (key == "thresh_iou") {
      cfg.fuse.thresh_iou = detail::parse_double(value, line.number, "thresh_iou");
    } else if (key == "thresh_nms") {
      cfg.fuse.thresh_nms = detail::parse_double(value, line.number, "thresh_nms");
    } else if (key == "bt_frames") {
      cfg.bt_frames = static_cast<int>(detail::parse_int(value, line.number, "bt_frames"));
    } else if (key == "inner_margin_ratio") {
      cfg.motion.inner_margin_ratio =
          detail::parse_double(value, line.number, "inner_margin_ratio");
      if (!(cfg.motion.inner_margin_ratio >= 0.0 && cfg.motion.inner_margin_ratio < 0.5))
        throw ParseError(line.number, "inner_margin_ratio must lie in [0, 0.5)");
    } else if (key == "min_pixels") {
      cfg.motion.min_pixels = static_cast<int>(detail::parse_int(value, line.number, "min_pixels"));
      if (cfg.motion.min_pixels < 1) throw ParseError(line.number, "min_pixels must be >= 1");
    } else if (key == "scale_mode") {
      if (value == "none")
        cfg.motion.scale_mode = ScaleMode::none;
      else if (value == "affine_fit")
        cfg.motion.scale_mode = ScaleMode::affine_fit;
      else
        throw ParseError(line.number, "scale_mode must be none or affine_fit");
    } else {
      throw ParseError(line.number, "unknown key '" + std::string(key) + "'");
    }
  }
}

inline PipelineConfig parse_pipeline_config(std::string_view text) {
  PipelineConfig cfg;
  apply_config_text(cfg, text);
  cfg.validate();
  return cfg;
}

// Precedence: explicit override > config file > built-in default.
inline PipelineConfig resolve_pipeline_config(const std::optional<std::string>& config_text,
                                              const ConfigOverrides& overrides) {
  PipelineConfig cfg;
  if (config_text) apply_config_text(cfg, *config_text);
  if (overrides.thresh_score) cfg.fuse.thresh_score = *overrides.thresh_score;
  if (overrides.thresh_iou) cfg.fuse.thresh_iou = *overrides.thresh_iou;
  if (overrides.thresh_nms) cfg.fuse.thresh_nms = *overrides.thresh_nms;
  if (overrides.bt_frames) cfg.bt_frames = *overrides.bt_frames;
  cfg.validate();
  return cfg;
}

}  // namespace fft
