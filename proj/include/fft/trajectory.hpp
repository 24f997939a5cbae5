#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fft/geometry.hpp"

namespace fft {

struct TrackPoint {
  BBox box;
  double score = 0.0;
};

// Time-indexed boxes sharing one identity. Frame indices are kept strictly
// increasing by the ordered map; gaps are permitted (occlusion).
class Trajectory {
 public:
  explicit Trajectory(std::int64_t id) : id_(id) {
    if (id < 1) throw std::invalid_argument("Trajectory: id must be >= 1");
  }

  std::int64_t id() const { return id_; }
  const std::map<std::int64_t, TrackPoint>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  bool has(std::int64_t frame) const { return entries_.count(frame) != 0; }
  const TrackPoint& at(std::int64_t frame) const { return entries_.at(frame); }
  std::int64_t first_frame() const { return entries_.begin()->first; }
  std::int64_t last_frame() const { return entries_.rbegin()->first; }

  void add(std::int64_t frame, const BBox& box, double score) {
    if (frame < 0) throw std::invalid_argument("Trajectory: negative frame");
    check_score(score, "Trajectory");
    if (!entries_.emplace(frame, TrackPoint{box, score}).second)
      throw std::logic_error("Trajectory: duplicate frame entry");
  }

 private:
  std::int64_t id_;
  std::map<std::int64_t, TrackPoint> entries_;
};

// The full trajectory collection plus the fresh-id counter. Ids are unique
// and never reused; next_id stays strictly above every issued id.
class TrajectorySet {
 public:
  bool empty() const { return tracks_.empty(); }
  std::size_t size() const { return tracks_.size(); }
  std::int64_t next_id() const { return next_id_; }
  bool contains(std::int64_t id) const { return tracks_.count(id) != 0; }
  const Trajectory& at(std::int64_t id) const { return tracks_.at(id); }
  const std::map<std::int64_t, Trajectory>& tracks() const { return tracks_; }

  // Creates a fresh single-entry trajectory and returns its id.
  std::int64_t mint(const BBox& box, double score, std::int64_t frame) {
    const std::int64_t id = next_id_;
    add_entry(id, frame, box, score);
    return id;
  }

  // Appends to an existing trajectory or creates one with the given id.
  void add_entry(std::int64_t id, std::int64_t frame, const BBox& box, double score) {
    auto it = tracks_.find(id);
    if (it == tracks_.end()) it = tracks_.emplace(id, Trajectory(id)).first;
    it->second.add(frame, box, score);
    if (id >= next_id_) next_id_ = id + 1;
  }

  // All targets present at a frame, ascending id.
  std::vector<Target> targets_at(std::int64_t frame) const {
    std::vector<Target> out;
    for (const auto& [id, trk] : tracks_)
      if (trk.has(frame)) {
        const TrackPoint& p = trk.at(frame);
        out.emplace_back(p.box, id, p.score, frame);
      }
    return out;
  }

  // Ids of non-empty trajectories with no entry at the given frame.
  std::vector<std::int64_t> ids_without_entry_at(std::int64_t frame) const {
    std::vector<std::int64_t> out;
    for (const auto& [id, trk] : tracks_)
      if (!trk.empty() && !trk.has(frame)) out.push_back(id);
    return out;
  }

  std::int64_t total_entries() const {
    std::int64_t n = 0;
    for (const auto& [id, trk] : tracks_) n += static_cast<std::int64_t>(trk.size());
    return n;
  }

  // (first, last) frame over all entries; {0, -1} when the set is empty.
  std::pair<std::int64_t, std::int64_t> frame_span() const {
    std::int64_t lo = 0, hi = -1;
    bool any = false;
    for (const auto& [id, trk] : tracks_) {
      if (trk.empty()) continue;
      if (!any || trk.first_frame() < lo) lo = trk.first_frame();
      if (!any || trk.last_frame() > hi) hi = trk.last_frame();
      any = true;
    }
    return {lo, hi};
  }

 private:
  std::map<std::int64_t, Trajectory> tracks_;
  std::int64_t next_id_ = 1;
};

}  // namespace fft
