#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fft/error.hpp"
#include "fft/geometry.hpp"
#include "fft/hungarian.hpp"
#include "fft/trajectory.hpp"

namespace fft {

// Disallowed pairs in assignment matrices; far above any feasible total cost
// (costs here are bounded by frame counts).
inline constexpr double kForbiddenCost = 1e9;

struct FrameAssignment {
  struct Match {
    std::int64_t gt_id;
    std::int64_t pred_id;
    double iou;
  };
  std::int64_t frame = 0;
  std::vector<Match> matches;
  std::vector<std::int64_t> unmatched_gt;
  std::vector<std::int64_t> unmatched_pred;
};

struct ClearMotCounts {
  std::int64_t gt_total = 0;
  std::int64_t match_total = 0;
  double iou_sum = 0.0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t idsw = 0;
  std::int64_t frag = 0;
  std::int64_t gt_tracks = 0;
  std::int64_t mostly_tracked = 0;
  std::int64_t mostly_lost = 0;

  double mota() const {
    if (gt_total == 0) return 1.0;
    return 1.0 - static_cast<double>(fp + fn + idsw) / static_cast<double>(gt_total);
  }
  double motp() const {
    if (match_total == 0) return gt_total == 0 ? 1.0 : 0.0;
    return iou_sum / static_cast<double>(match_total);
  }
  double mt_pct() const {
    return gt_tracks == 0 ? 0.0 : 100.0 * static_cast<double>(mostly_tracked) / gt_tracks;
  }
  double ml_pct() const {
    return gt_tracks == 0 ? 0.0 : 100.0 * static_cast<double>(mostly_lost) / gt_tracks;
  }
};

struct IdentityScores {
  std::int64_t idtp = 0;
  std::int64_t idfp = 0;
  std::int64_t idfn = 0;

  // A fully vacuous comparison (no boxes on either side) counts as perfect;
  // any other zero denominator scores 0.
  double idp() const {
    if (idtp + idfp == 0) return vacuous() ? 1.0 : 0.0;
    return static_cast<double>(idtp) / static_cast<double>(idtp + idfp);
  }
  double idr() const {
    if (idtp + idfn == 0) return vacuous() ? 1.0 : 0.0;
    return static_cast<double>(idtp) / static_cast<double>(idtp + idfn);
  }
  double idf1() const {
    const std::int64_t denom = 2 * idtp + idfp + idfn;
    if (denom == 0) return vacuous() ? 1.0 : 0.0;
    return 2.0 * static_cast<double>(idtp) / static_cast<double>(denom);
  }

 private:
  bool vacuous() const { return idtp == 0 && idfp == 0 && idfn == 0; }
};

struct MotReport {
  ClearMotCounts clear;
  IdentityScores ident;
};

namespace detail {

inline void check_frame_ranges(const TrajectorySet& gt, const TrajectorySet& pred) {
  if (gt.empty()) {
    if (!pred.empty())
      throw FrameRangeError("ground truth is empty but predictions are present");
    return;
  }
  if (pred.empty()) return;
  const auto [g0, g1] = gt.frame_span();
  const auto [p0, p1] = pred.frame_span();
  if (p0 < g0 || p1 > g1)
    throw FrameRangeError("prediction frames [" + std::to_string(p0) + ", " + std::to_string(p1) +
                          "] outside ground-truth range [" + std::to_string(g0) + ", " +
                          std::to_string(g1) + "]");
}

}  // namespace detail

// Per-frame correspondence in the CLEAR convention: a (gt, pred) pair from an
// earlier frame is kept as long as it still overlaps at the threshold, and
// only the remainder is matched optimally on 1 - IoU.
inline std::vector<FrameAssignment> match_frames(const TrajectorySet& gt,
                                                 const TrajectorySet& pred,
                                                 double iou_thresh = 0.5) {
  detail::check_frame_ranges(gt, pred);
  std::vector<FrameAssignment> out;
  if (gt.empty()) return out;
  const auto [first, last] = gt.frame_span();

  std::map<std::int64_t, std::int64_t> last_match;  // gt id -> most recent pred id
  for (std::int64_t t = first; t <= last; ++t) {
    const std::vector<Target> gts = gt.targets_at(t);
    const std::vector<Target> preds = pred.targets_at(t);
    std::map<std::int64_t, const Target*> pred_by_id;
    for (const Target& p : preds) pred_by_id[p.id] = &p;

    FrameAssignment fa;
    fa.frame = t;
    std::set<std::int64_t> used_pred;
    std::vector<const Target*> open_gt;

    for (const Target& g : gts) {
      const auto lm = last_match.find(g.id);
      if (lm != last_match.end()) {
        const auto pit = pred_by_id.find(lm->second);
        if (pit != pred_by_id.end() && !used_pred.count(lm->second)) {
          const double ov = iou(g.box, pit->second->box);
          if (ov >= iou_thresh) {
            fa.matches.push_back({g.id, lm->second, ov});
            used_pred.insert(lm->second);
            continue;
          }
        }
      }
      open_gt.push_back(&g);
    }

    std::vector<const Target*> open_pred;
    for (const Target& p : preds)
      if (!used_pred.count(p.id)) open_pred.push_back(&p);

    if (!open_gt.empty() && !open_pred.empty()) {
      std::vector<std::vector<double>> cost(open_gt.size(),
                                            std::vector<double>(open_pred.size()));
      for (std::size_t i = 0; i < open_gt.size(); ++i)
        for (std::size_t j = 0; j < open_pred.size(); ++j) {
          const double ov = iou(open_gt[i]->box, open_pred[j]->box);
          cost[i][j] = ov >= iou_thresh ? 1.0 - ov : kForbiddenCost;
        }
      const AssignmentResult res = solve_assignment(cost);
      std::vector<char> gt_done(open_gt.size(), 0);
      for (std::size_t i = 0; i < open_gt.size(); ++i) {
        const int j = res.row_to_col[i];
        if (j < 0) continue;
        const double ov = iou(open_gt[i]->box, open_pred[j]->box);
        if (ov < iou_thresh) continue;
        fa.matches.push_back({open_gt[i]->id, open_pred[j]->id, ov});
        used_pred.insert(open_pred[j]->id);
        gt_done[i] = 1;
      }
      for (std::size_t i = 0; i < open_gt.size(); ++i)
        if (!gt_done[i]) fa.unmatched_gt.push_back(open_gt[i]->id);
    } else {
      for (const Target* g : open_gt) fa.unmatched_gt.push_back(g->id);
    }
    for (const Target& p : preds)
      if (!used_pred.count(p.id)) fa.unmatched_pred.push_back(p.id);

    std::sort(fa.matches.begin(), fa.matches.end(),
              [](const FrameAssignment::Match& a, const FrameAssignment::Match& b) {
                return a.gt_id < b.gt_id;
              });
    std::sort(fa.unmatched_gt.begin(), fa.unmatched_gt.end());
    std::sort(fa.unmatched_pred.begin(), fa.unmatched_pred.end());
    for (const auto& m : fa.matches) last_match[m.gt_id] = m.pred_id;
    out.push_back(std::move(fa));
  }
  return out;
}

inline ClearMotCounts clear_mot(const TrajectorySet& gt, const TrajectorySet& pred,
                                double iou_thresh = 0.5) {
  const std::vector<FrameAssignment> frames = match_frames(gt, pred, iou_thresh);
  ClearMotCounts c;
  c.gt_total = gt.total_entries();
  c.gt_tracks = static_cast<std::int64_t>(gt.size());

  std::map<std::int64_t, std::int64_t> last_match;
  std::map<std::int64_t, std::int64_t> matched_frames;
  // Per gt track: matched at its previous present frame, and whether a
  // matched run has already ended at least once since then.
  std::map<std::int64_t, char> was_matched, in_gap;

  for (const FrameAssignment& fa : frames) {
    c.fp += static_cast<std::int64_t>(fa.unmatched_pred.size());
    c.fn += static_cast<std::int64_t>(fa.unmatched_gt.size());
    for (const auto& m : fa.matches) {
      ++c.match_total;
      c.iou_sum += m.iou;
      if (const auto it = last_match.find(m.gt_id); it != last_match.end() && it->second != m.pred_id)
        ++c.idsw;
      last_match[m.gt_id] = m.pred_id;
      ++matched_frames[m.gt_id];
      if (was_matched[m.gt_id] && in_gap[m.gt_id]) ++c.frag;
      was_matched[m.gt_id] = 1;
      in_gap[m.gt_id] = 0;
    }
    for (const std::int64_t gid : fa.unmatched_gt)
      if (was_matched[gid]) in_gap[gid] = 1;
  }

  for (const auto& [id, trk] : gt.tracks()) {
    const double covered =
        static_cast<double>(matched_frames[id]) / static_cast<double>(trk.size());
    if (covered >= 0.8) ++c.mostly_tracked;
    if (covered <= 0.2) ++c.mostly_lost;
  }
  return c;
}

// Global trajectory-level matching for the identity family: every (gt, pred)
// pair costs the number of frame-level misses it would incur, dummy partners
// cost a track's full length, and the optimal matching defines IDTP/IDFP/IDFN.
inline IdentityScores identity_metrics(const TrajectorySet& gt, const TrajectorySet& pred,
                                       double iou_thresh = 0.5) {
  detail::check_frame_ranges(gt, pred);

  std::vector<const Trajectory*> gts, preds;
  for (const auto& [id, trk] : gt.tracks()) gts.push_back(&trk);
  for (const auto& [id, trk] : pred.tracks()) preds.push_back(&trk);
  const std::size_t ng = gts.size(), np = preds.size();

  std::int64_t gt_frames = 0, pred_frames = 0;
  for (const Trajectory* g : gts) gt_frames += static_cast<std::int64_t>(g->size());
  for (const Trajectory* p : preds) pred_frames += static_cast<std::int64_t>(p->size());

  // overlap[i][j] = frames where gts[i] and preds[j] coincide at the IoU
  // threshold.
  std::vector<std::vector<std::int64_t>> overlap(ng, std::vector<std::int64_t>(np, 0));
  for (std::size_t i = 0; i < ng; ++i)
    for (std::size_t j = 0; j < np; ++j)
      for (const auto& [frame, point] : gts[i]->entries()) {
        if (!preds[j]->has(frame)) continue;
        if (iou(point.box, preds[j]->at(frame).box) >= iou_thresh) ++overlap[i][j];
      }

  const std::size_t n = ng + np;
  IdentityScores s;
  if (n == 0) return s;

  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < ng; ++i)
    for (std::size_t j = 0; j < np; ++j)
      cost[i][j] = static_cast<double>(static_cast<std::int64_t>(gts[i]->size()) - overlap[i][j] +
                                       static_cast<std::int64_t>(preds[j]->size()) - overlap[i][j]);
  for (std::size_t i = 0; i < ng; ++i)
    for (std::size_t j = 0; j < ng; ++j)
      cost[i][np + j] = i == j ? static_cast<double>(gts[i]->size()) : kForbiddenCost;
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < np; ++j)
      cost[ng + i][j] = i == j ? static_cast<double>(preds[i]->size()) : kForbiddenCost;

  const AssignmentResult res = solve_assignment(cost);
  std::int64_t idtp = 0;
  for (std::size_t i = 0; i < ng; ++i) {
    const int j = res.row_to_col[i];
    if (j >= 0 && static_cast<std::size_t>(j) < np) idtp += overlap[i][j];
  }
  s.idtp = idtp;
  s.idfn = gt_frames - idtp;
  s.idfp = pred_frames - idtp;
  return s;
}

inline MotReport evaluate(const TrajectorySet& gt, const TrajectorySet& pred,
                          double iou_thresh = 0.5) {
  MotReport r;
  r.clear = clear_mot(gt, pred, iou_thresh);
  r.ident = identity_metrics(gt, pred, iou_thresh);
  return r;
}

// Fold of per-sequence counts; rates are recomputed from the pooled counts.
inline MotReport aggregate(const std::vector<MotReport>& reports) {
  MotReport total;
  for (const MotReport& r : reports) {
    total.clear.gt_total += r.clear.gt_total;
    total.clear.match_total += r.clear.match_total;
    total.clear.iou_sum += r.clear.iou_sum;
    total.clear.fp += r.clear.fp;
    total.clear.fn += r.clear.fn;
    total.clear.idsw += r.clear.idsw;
    total.clear.frag += r.clear.frag;
    total.clear.gt_tracks += r.clear.gt_tracks;
    total.clear.mostly_tracked += r.clear.mostly_tracked;
    total.clear.mostly_lost += r.clear.mostly_lost;
    total.ident.idtp += r.ident.idtp;
    total.ident.idfp += r.ident.idfp;
    total.ident.idfn += r.ident.idfn;
  }
  return total;
}

// Tab-separated report table; one row per sequence plus an OVERALL fold when
// more than one sequence is present.
inline std::string format_report_table(
    const std::vector<std::pair<std::string, MotReport>>& rows) {
  std::string out = "Seq\tMOTA\tMOTP\tIDF1\tIDP\tIDR\tMT\tML\tFP\tFN\tIDSW\tFrag\n";
  const auto emit = [&out](const std::string& name, const MotReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.2f\t%.2f\t%lld\t%lld\t%lld\t%lld\n",
                  name.c_str(), r.clear.mota(), r.clear.motp(), r.ident.idf1(), r.ident.idp(),
                  r.ident.idr(), r.clear.mt_pct(), r.clear.ml_pct(),
                  static_cast<long long>(r.clear.fp), static_cast<long long>(r.clear.fn),
                  static_cast<long long>(r.clear.idsw), static_cast<long long>(r.clear.frag));
    out += buf;
  };
  for (const auto& [name, report] : rows) emit(name, report);
  if (rows.size() > 1) {
    std::vector<MotReport> reports;
    reports.reserve(rows.size());
    for (const auto& [name, report] : rows) reports.push_back(report);
    emit("OVERALL", aggregate(reports));
  }
  return out;
}

}  // namespace fft
