#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fft/error.hpp"
#include "fft/flow.hpp"
#include "fft/fuse.hpp"
#include "fft/geometry.hpp"
#include "fft/trajectory.hpp"

namespace fft {

struct PipelineConfig {
  FuseConfig fuse;
  // Maximum backtracking lookback depth; 1 disables backtracking.
  int bt_frames = 30;
  MotionEstimatorConfig motion;

  void validate() const {
    fuse.validate();
    if (bt_frames < 1) throw std::invalid_argument("PipelineConfig: bt_frames must be >= 1");
  }
};

// Everything the pipeline consumes for one frame: the detections, the flow
// from the previous frame, and any direct lookback flows from frame t-d to t
// used by backtracking. Absent lookback depths are simply skipped.
struct FrameBundle {
  std::int64_t frame = 0;
  std::optional<FlowField> flow_prev;
  std::map<int, FlowField> lookback_flows;
  std::vector<Detection> detections;
};

namespace detail {

inline std::vector<Proposal> detection_proposals(std::span<const Detection> dets) {
  std::vector<Proposal> props;
  props.reserve(dets.size());
  for (const Detection& d : dets) props.push_back({d.box, std::nullopt, d.score});
  return props;
}

// Pipeline-side detection refinement: refine, kill, drop degenerate boxes.
inline std::vector<Detection> refine_detections(std::int64_t frame,
                                                std::span<const Detection> dets, Refiner& refiner,
                                                const FuseConfig& cfg) {
  const auto props = detection_proposals(dets);
  std::vector<Detection> out;
  for (const RefinedProposal& r : refine_and_kill(frame, props, refiner, cfg))
    if (!r.box.degenerate()) out.emplace_back(r.box, r.score);
  return out;
}

}  // namespace detail

// Seeds the trajectory set from the first frame: refined detections pass a
// frame-wise NMS and each survivor opens a fresh trajectory. Ids are issued
// in input order starting at 1.
inline TrajectorySet init(const FrameBundle& first, Refiner& refiner, const PipelineConfig& cfg) {
  cfg.validate();
  if (first.frame != 0) throw std::invalid_argument("init: first bundle must be frame 0");
  const std::vector<Detection> refined =
      detail::refine_detections(first.frame, first.detections, refiner, cfg.fuse);

  std::vector<detail::NmsItem> items;
  items.reserve(refined.size());
  for (std::size_t i = 0; i < refined.size(); ++i)
    items.push_back({&refined[i].box, refined[i].score, i});
  std::vector<std::size_t> keep = detail::greedy_nms(items, cfg.fuse.thresh_nms);
  std::sort(keep.begin(), keep.end());

  TrajectorySet set;
  for (std::size_t i : keep) set.mint(refined[i].box, refined[i].score, 0);
  return set;
}

// Re-associates unmatched detections with trajectories that have missed
// recent frames. For each depth d = 2..bt_frames in turn, trajectories whose
// last entry sits exactly at t-d are flowed directly to t with the depth-d
// lookback field and fused against the remaining detections. Only
// trajectories that actually claim a detection are revived (no tracker-only
// survivors here), each at most once, with an entry at frame t only.
inline std::pair<std::vector<Target>, std::vector<Detection>> backtrack(
    const TrajectorySet& set, std::span<const std::int64_t> nas_ids,
    std::vector<Detection> unmatched, const FrameBundle& bundle, Refiner& refiner,
    const PipelineConfig& cfg) {
  cfg.validate();
  const std::int64_t t = bundle.frame;
  std::vector<Target> revived;
  for (int d = 2; d <= cfg.bt_frames && !unmatched.empty(); ++d) {
    const auto flow_it = bundle.lookback_flows.find(d);
    if (flow_it == bundle.lookback_flows.end()) continue;

    std::vector<Target> candidates;
    for (std::int64_t id : nas_ids) {
      if (!set.contains(id)) continue;
      const Trajectory& traj = set.at(id);
      if (traj.empty() || traj.last_frame() != t - d) continue;
      if (std::any_of(revived.begin(), revived.end(),
                      [id](const Target& r) { return r.id == id; }))
        continue;
      const TrackPoint& tp = traj.at(t - d);
      candidates.emplace_back(tp.box, id, tp.score, t - d);
    }
    if (candidates.empty()) continue;

    const std::vector<Target> flowed = flow_targets(flow_it->second, candidates, cfg.motion);
    FuseDetail detail = fuse_detailed(flowed, unmatched, refiner, t, cfg.fuse);
    for (const Target& cand : detail.outcome.tracked)
      if (std::binary_search(detail.matched_ids.begin(), detail.matched_ids.end(), cand.id))
        revived.push_back(cand);
    unmatched = std::move(detail.outcome.unmatched_detections);
  }
  return {std::move(revived), std::move(unmatched)};
}

// One frame of the inference loop: refine detections, flow the previous
// frame's targets forward, fuse, append, backtrack the leftovers, and mint
// new trajectories from whatever detections remain.
inline void step(TrajectorySet& set, const FrameBundle& bundle, Refiner& refiner,
                 const PipelineConfig& cfg) {
  cfg.validate();
  const std::int64_t t = bundle.frame;
  if (t < 1) throw std::invalid_argument("step: frame must be >= 1");
  if (!bundle.flow_prev) throw MissingFlowError(t);

  const std::vector<Detection> dets =
      detail::refine_detections(t, bundle.detections, refiner, cfg.fuse);

  const std::vector<Target> prev = set.targets_at(t - 1);
  const std::vector<Target> flowed = flow_targets(*bundle.flow_prev, prev, cfg.motion);

  FuseOutcome outcome = fuse(flowed, dets, refiner, t, cfg.fuse);
  for (const Target& trk : outcome.tracked)
    if (!trk.box.degenerate()) set.add_entry(trk.id, t, trk.box, trk.score);

  const std::vector<std::int64_t> nas = set.ids_without_entry_at(t);
  auto [revived, leftover] =
      backtrack(set, nas, std::move(outcome.unmatched_detections), bundle, refiner, cfg);
  // A revival that kept its flowed box was never NMS-checked against this
  // frame's placed boxes; suppress it rather than break the overlap bound.
  std::vector<BBox> placed;
  for (const Target& trk : outcome.tracked) placed.push_back(trk.box);
  for (const Target& r : revived) {
    if (r.box.degenerate()) continue;
    const bool collides =
        std::any_of(placed.begin(), placed.end(),
                    [&](const BBox& b) { return iou(b, r.box) > cfg.fuse.thresh_nms; });
    if (collides) continue;
    set.add_entry(r.id, t, r.box, r.score);
    placed.push_back(r.box);
  }

  for (const Detection& d : leftover)
    if (!d.box.degenerate()) set.mint(d.box, d.score, t);
}

// Runs the full loop over a lazily produced sequence of bundles. bundle_at(t)
// must return the bundle for frame t; frames are processed strictly in order
// from 0.
inline TrajectorySet run(std::int64_t frame_count,
                         const std::function<FrameBundle(std::int64_t)>& bundle_at,
                         Refiner& refiner, const PipelineConfig& cfg) {
  cfg.validate();
  if (frame_count <= 0) return TrajectorySet{};
  TrajectorySet set = init(bundle_at(0), refiner, cfg);
  for (std::int64_t t = 1; t < frame_count; ++t) step(set, bundle_at(t), refiner, cfg);
  return set;
}

inline TrajectorySet run(std::span<const FrameBundle> frames, Refiner& refiner,
                         const PipelineConfig& cfg) {
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].frame != static_cast<std::int64_t>(i))
      throw std::invalid_argument("run: frames must be consecutive from 0");
  return run(static_cast<std::int64_t>(frames.size()),
             [&frames](std::int64_t t) { return frames[static_cast<std::size_t>(t)]; }, refiner,
             cfg);
}

}  // namespace fft
