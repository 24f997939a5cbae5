#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fft/error.hpp"
#include "fft/geometry.hpp"

namespace fft {

struct FuseConfig {
  double thresh_score = 0.5;
  double thresh_iou = 0.5;
  double thresh_nms = 0.5;

  void validate() const {
    for (double v : {thresh_score, thresh_iou, thresh_nms})
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("FuseConfig: thresholds must lie in [0, 1]");
  }
};

// A box proposed for refinement; tracked proposals carry their trajectory id,
// detection proposals carry their incoming score.
struct Proposal {
  BBox box;
  std::optional<std::int64_t> id;
  std::optional<double> score;
};

struct Refined {
  BBox box;
  double score = 0.0;
};

struct RefinedProposal {
  BBox box;
  std::optional<std::int64_t> id;
  double score = 0.0;
};

// Scores (and optionally adjusts) box proposals for one frame. Stands in for
// the trained refinement head; implementations must return one output per
// proposal, in order, with scores in [0, 1].
class Refiner {
 public:
  virtual ~Refiner() = default;
  virtual std::vector<Refined> refine(std::int64_t frame, std::span<const Proposal> proposals) = 0;
};

// Passes boxes through untouched; score is the incoming one, or 1.0 for
// proposals that carry none.
class IdentityRefiner final : public Refiner {
 public:
  std::vector<Refined> refine(std::int64_t, std::span<const Proposal> proposals) override {
    std::vector<Refined> out;
    out.reserve(proposals.size());
    for (const Proposal& p : proposals) out.push_back({p.box, p.score.value_or(1.0)});
    return out;
  }
};

// Scores each proposal by its best IoU against the frame's raw detections.
// Targets coasting with no detection support fall below any useful
// thresh_score and get killed, which is what exercises backtracking.
class OverlapRefiner final : public Refiner {
 public:
  explicit OverlapRefiner(std::map<std::int64_t, std::vector<Detection>> detections_by_frame)
      : detections_(std::move(detections_by_frame)) {}

  std::vector<Refined> refine(std::int64_t frame, std::span<const Proposal> proposals) override {
    const std::vector<Detection>* dets = nullptr;
    if (auto it = detections_.find(frame); it != detections_.end()) dets = &it->second;
    std::vector<Refined> out;
    out.reserve(proposals.size());
    for (const Proposal& p : proposals) {
      double best = 0.0;
      if (dets)
        for (const Detection& d : *dets) best = std::max(best, iou(p.box, d.box));
      out.push_back({p.box, best});
    }
    return out;
  }

 private:
  std::map<std::int64_t, std::vector<Detection>> detections_;
};

// Replays externally refined boxes: each proposal adopts the same-frame row
// with the highest IoU when that IoU reaches 0.7; otherwise the box is kept
// and scored 0.
class FileRefiner final : public Refiner {
 public:
  static constexpr double kMatchIou = 0.7;

  explicit FileRefiner(std::map<std::int64_t, std::vector<Detection>> rows_by_frame)
      : rows_(std::move(rows_by_frame)) {}

  std::vector<Refined> refine(std::int64_t frame, std::span<const Proposal> proposals) override {
    const std::vector<Detection>* rows = nullptr;
    if (auto it = rows_.find(frame); it != rows_.end()) rows = &it->second;
    std::vector<Refined> out;
    out.reserve(proposals.size());
    for (const Proposal& p : proposals) {
      const Detection* best = nullptr;
      double best_iou = 0.0;
      if (rows)
        for (const Detection& r : *rows) {
          const double ov = iou(p.box, r.box);
          if (ov > best_iou) {
            best_iou = ov;
            best = &r;
          }
        }
      if (best && best_iou >= kMatchIou)
        out.push_back({best->box, best->score});
      else
        out.push_back({p.box, 0.0});
    }
    return out;
  }

 private:
  std::map<std::int64_t, std::vector<Detection>> rows_;
};

namespace detail {

struct NmsItem {
  const BBox* box;
  double score;
  // Tie-break at equal score: lower key wins the contest order.
  std::uint64_t key;
};

// Greedy max-score suppression; returns kept item indices in contest order
// (descending score, then ascending key).
inline std::vector<std::size_t> greedy_nms(const std::vector<NmsItem>& items, double thresh) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (items[a].score != items[b].score) return items[a].score > items[b].score;
    return items[a].key < items[b].key;
  });
  std::vector<char> dead(items.size(), 0);
  std::vector<std::size_t> kept;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (dead[i]) continue;
    kept.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!dead[j] && iou(*items[i].box, *items[j].box) > thresh) dead[j] = 1;
    }
  }
  return kept;
}

}  // namespace detail

// Greedy NMS over anything with .box and .score: repeatedly keep the
// highest-score remaining box and suppress every remaining box whose IoU with
// it exceeds thresh_nms. Ties go to the lower original index. Output is in
// descending-score order.
template <typename T>
std::vector<T> nms(std::span<const T> boxes, double thresh_nms) {
  std::vector<detail::NmsItem> items;
  items.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i)
    items.push_back({&boxes[i].box, boxes[i].score, i});
  std::vector<T> out;
  for (std::size_t i : detail::greedy_nms(items, thresh_nms)) out.push_back(boxes[i]);
  return out;
}

template <typename T>
std::vector<T> nms(const std::vector<T>& boxes, double thresh_nms) {
  return nms(std::span<const T>(boxes), thresh_nms);
}

// Refines every proposal and drops the ones scoring below thresh_score.
// Ids are carried through; order is preserved.
inline std::vector<RefinedProposal> refine_and_kill(std::int64_t frame,
                                                    std::span<const Proposal> proposals,
                                                    Refiner& refiner, const FuseConfig& cfg) {
  cfg.validate();
  const std::vector<Refined> refined = refiner.refine(frame, proposals);
  if (refined.size() != proposals.size())
    throw RefinerError("refiner returned " + std::to_string(refined.size()) + " outputs for " +
                       std::to_string(proposals.size()) + " proposals");
  std::vector<RefinedProposal> out;
  for (std::size_t i = 0; i < refined.size(); ++i) {
    if (!(refined[i].score >= 0.0 && refined[i].score <= 1.0))
      throw RefinerError("refiner score " + std::to_string(refined[i].score) +
                         " outside [0, 1] at frame " + std::to_string(frame));
    if (refined[i].score < cfg.thresh_score) continue;
    out.push_back({refined[i].box, proposals[i].id, refined[i].score});
  }
  return out;
}

struct FuseOutcome {
  std::vector<Target> tracked;                  // ascending id
  std::vector<Detection> unmatched_detections;  // original detection order
};

struct FuseDetail {
  FuseOutcome outcome;
  // Ids among outcome.tracked whose box was matched to a detection; the rest
  // survived on their refined score alone.
  std::vector<std::int64_t> matched_ids;
};

// FuseTracker core. Tracked proposals are refined and killed, both sets pass
// a first-level NMS separately, then each tracked box greedily (descending
// refined score) claims the unconsumed detection with the largest IoU when
// that IoU exceeds thresh_iou. A claimed detection replaces the tracked box
// and score only when its score is strictly higher; the id always survives.
// A second-level NMS then runs jointly over fused targets and leftover
// detections (tracked wins ties), and whatever detections survive it are
// returned as unmatched.
inline FuseDetail fuse_detailed(std::span<const Target> tracked,
                                std::span<const Detection> detections, Refiner& refiner,
                                std::int64_t frame, const FuseConfig& cfg) {
  cfg.validate();

  std::vector<Proposal> props;
  props.reserve(tracked.size());
  for (const Target& t : tracked) props.push_back({t.box, t.id, t.score});
  const std::vector<RefinedProposal> refined = refine_and_kill(frame, props, refiner, cfg);

  // Level-1 NMS within each source.
  const std::vector<RefinedProposal> trk = nms(refined, cfg.thresh_nms);
  std::vector<detail::NmsItem> det_items;
  det_items.reserve(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i)
    det_items.push_back({&detections[i].box, detections[i].score, i});
  const std::vector<std::size_t> det_keep = detail::greedy_nms(det_items, cfg.thresh_nms);

  // Matching; trk is already in descending refined-score order.
  struct Fused {
    BBox box;
    double score;
    std::int64_t id;
    bool matched;
  };
  std::vector<Fused> fused;
  fused.reserve(trk.size());
  std::vector<char> det_used(det_keep.size(), 0);
  for (const RefinedProposal& t : trk) {
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < det_keep.size(); ++j) {
      if (det_used[j]) continue;
      const double ov = iou(t.box, detections[det_keep[j]].box);
      if (ov > best_iou) {
        best_iou = ov;
        best = static_cast<int>(j);
      }
    }
    BBox box = t.box;
    double score = t.score;
    bool matched = false;
    if (best >= 0 && best_iou > cfg.thresh_iou) {
      det_used[best] = 1;
      matched = true;
      const Detection& d = detections[det_keep[best]];
      if (d.score > score) {
        box = d.box;
        score = d.score;
      }
    }
    fused.push_back({box, score, *t.id, matched});
  }

  // Level-2 NMS over fused targets plus unclaimed detections. Keys order
  // tracked entries ahead of detections at equal score.
  std::vector<detail::NmsItem> merged;
  std::vector<std::pair<int, std::size_t>> merged_src;  // (0 = fused idx, 1 = original det idx)
  for (std::size_t i = 0; i < fused.size(); ++i) {
    merged.push_back({&fused[i].box, fused[i].score, i});
    merged_src.emplace_back(0, i);
  }
  constexpr std::uint64_t kDetKeyBase = std::uint64_t{1} << 32;
  for (std::size_t j = 0; j < det_keep.size(); ++j) {
    if (det_used[j]) continue;
    const std::size_t orig = det_keep[j];
    merged.push_back({&detections[orig].box, detections[orig].score, kDetKeyBase + orig});
    merged_src.emplace_back(1, orig);
  }

  FuseDetail out;
  std::vector<std::size_t> kept_dets;
  for (std::size_t m : detail::greedy_nms(merged, cfg.thresh_nms)) {
    const auto [src, idx] = merged_src[m];
    if (src == 0) {
      const Fused& f = fused[idx];
      out.outcome.tracked.emplace_back(f.box, f.id, f.score, frame);
      if (f.matched) out.matched_ids.push_back(f.id);
    } else {
      kept_dets.push_back(idx);
    }
  }
  std::sort(out.outcome.tracked.begin(), out.outcome.tracked.end(),
            [](const Target& a, const Target& b) { return a.id < b.id; });
  std::sort(out.matched_ids.begin(), out.matched_ids.end());
  std::sort(kept_dets.begin(), kept_dets.end());
  for (std::size_t j : kept_dets) out.outcome.unmatched_detections.push_back(detections[j]);
  return out;
}

inline FuseOutcome fuse(std::span<const Target> tracked, std::span<const Detection> detections,
                        Refiner& refiner, std::int64_t frame, const FuseConfig& cfg) {
  return fuse_detailed(tracked, detections, refiner, frame, cfg).outcome;
}

}  // namespace fft
