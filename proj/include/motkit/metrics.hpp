// metrics.hpp: tracking evaluation. Per-frame CLEAR matching (MOTA and
// friends), identity-level IDF1, mostly-tracked/lost fractions, and
// track-level average precision.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "motkit/assignment.hpp"
#include "motkit/geometry.hpp"
#include "motkit/track.hpp"

namespace motkit {

struct SequenceMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct MissingScores : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct MotReport {
  double MOTA = 0.0;
  double IDF1 = 0.0;
  double MT = 0.0;  // fraction of gt trajectories covered >= 80%
  double ML = 0.0;  // fraction covered <= 20%
  long long FP = 0;
  long long FN = 0;
  long long IDsw = 0;
  long long gt_count = 0;
};

namespace detail {

struct FrameMatching {
  // matched pairs per frame: (gt id, pred id)
  std::vector<std::vector<std::pair<TrackId, TrackId>>> matches;
  long long fp = 0;
  long long fn = 0;
  long long idsw = 0;
};

/// The CLEAR per-frame protocol: keep last frame's correspondences that are
/// still valid, then optimally assign the rest (max cardinality, then max
/// total IoU), all gated at `thr`. An ID switch is counted when a gt
/// identity is matched to a different predicted id than its most recent
/// match.
inline FrameMatching clear_frame_matching(const TrajectorySet& pred,
                                          const TrajectorySet& gt,
                                          double thr) {
  FrameMatching out;
  out.matches.resize(gt.sequence_length);

  struct LastMatch {
    TrackId pred_id;
    int frame;
  };
  std::map<TrackId, LastMatch> last;  // gt id -> most recent matched pred

  for (int f = 0; f < gt.sequence_length; ++f) {
    std::vector<std::pair<TrackId, const BBox*>> g, p;
    for (const auto& [id, t] : gt.tracks) {
      auto it = t.boxes.find(f);
      if (it != t.boxes.end()) g.emplace_back(id, &it->second);
    }
    for (const auto& [id, t] : pred.tracks) {
      auto it = t.boxes.find(f);
      if (it != t.boxes.end()) p.emplace_back(id, &it->second);
    }

    std::vector<bool> g_used(g.size(), false), p_used(p.size(), false);
    auto& frame_matches = out.matches[f];

    // Carry-over pass, most recent matches first so a predicted id that two
    // gt identities both point at goes to the one matched last.
    std::vector<std::size_t> order(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      auto ia = last.find(g[a].first), ib = last.find(g[b].first);
      const int fa = ia == last.end() ? -1 : ia->second.frame;
      const int fb = ib == last.end() ? -1 : ib->second.frame;
      return fa > fb;
    });
    for (std::size_t oi : order) {
      auto it = last.find(g[oi].first);
      if (it == last.end()) continue;
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p_used[j] || p[j].first != it->second.pred_id) continue;
        if (iou(*g[oi].second, *p[j].second) >= thr) {
          g_used[oi] = true;
          p_used[j] = true;
          frame_matches.emplace_back(g[oi].first, p[j].first);
        }
        break;
      }
    }

    // Optimal assignment over what is left.
    std::vector<std::size_t> gr, pr;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g_used[i]) gr.push_back(i);
    for (std::size_t j = 0; j < p.size(); ++j)
      if (!p_used[j]) pr.push_back(j);
    if (!gr.empty() && !pr.empty()) {
      std::vector<double> w(gr.size() * pr.size(), 0.0);
      for (std::size_t a = 0; a < gr.size(); ++a)
        for (std::size_t b = 0; b < pr.size(); ++b) {
          const double v = iou(*g[gr[a]].second, *p[pr[b]].second);
          if (v >= thr) w[a * pr.size() + b] = v;
        }
      const auto match = max_weight_assignment(w, static_cast<int>(gr.size()),
                                               static_cast<int>(pr.size()));
      for (std::size_t a = 0; a < gr.size(); ++a) {
        if (match[a] < 0) continue;
        g_used[gr[a]] = true;
        p_used[pr[match[a]]] = true;
        frame_matches.emplace_back(g[gr[a]].first, p[pr[match[a]]].first);
      }
    }

    for (std::size_t j = 0; j < p.size(); ++j)
      if (!p_used[j]) ++out.fp;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g_used[i]) ++out.fn;
    for (const auto& [gid, pid] : frame_matches) {
      auto it = last.find(gid);
      if (it != last.end() && it->second.pred_id != pid) ++out.idsw;
      last[gid] = LastMatch{pid, f};
    }
  }
  return out;
}

}  // namespace detail

inline void require_same_sequence(const TrajectorySet& pred,
                                  const TrajectorySet& gt) {
  if (pred.sequence_length != gt.sequence_length)
    throw SequenceMismatch("sequence lengths differ: pred " +
                           std::to_string(pred.sequence_length) + " vs gt " +
                           std::to_string(gt.sequence_length));
}

/// Global identity-level F1: trajectories are paired once for the whole
/// sequence so that the number of identity-correct boxes (IDTP) is maximal.
inline double idf1(const TrajectorySet& pred, const TrajectorySet& gt,
                   double iou_threshold = 0.5) {
  require_same_sequence(pred, gt);
  std::vector<TrackId> gids, pids;
  for (const auto& [id, t] : gt.tracks) gids.push_back(id);
  for (const auto& [id, t] : pred.tracks) pids.push_back(id);

  std::vector<double> overlap(gids.size() * pids.size(), 0.0);
  for (std::size_t a = 0; a < gids.size(); ++a) {
    const auto& gt_boxes = gt.tracks.at(gids[a]).boxes;
    for (std::size_t b = 0; b < pids.size(); ++b) {
      const auto& pr_boxes = pred.tracks.at(pids[b]).boxes;
      long long m = 0;
      for (const auto& [f, gb] : gt_boxes) {
        auto it = pr_boxes.find(f);
        if (it != pr_boxes.end() && iou(gb, it->second) >= iou_threshold) ++m;
      }
      overlap[a * pids.size() + b] = static_cast<double>(m);
    }
  }
  long long idtp = 0;
  if (!gids.empty() && !pids.empty()) {
    // pure max-total-overlap pairing: identity truth-to-result matching
    const auto match = max_weight_assignment(overlap, static_cast<int>(gids.size()),
                                             static_cast<int>(pids.size()),
                                             /*cardinality_first=*/false);
    for (std::size_t a = 0; a < gids.size(); ++a)
      if (match[a] >= 0)
        idtp += static_cast<long long>(overlap[a * pids.size() + match[a]]);
  }
  const long long total =
      static_cast<long long>(gt.box_count() + pred.box_count());
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(idtp) / static_cast<double>(total);
}

/// Mostly-tracked / mostly-lost fractions from the CLEAR per-frame matching:
/// a gt trajectory is MT when >= 80% of its frames are matched under any
/// predicted id, ML when <= 20% are.
inline std::pair<double, double> mt_ml(const TrajectorySet& pred,
                                       const TrajectorySet& gt,
                                       double iou_threshold = 0.5) {
  require_same_sequence(pred, gt);
  const auto fm = detail::clear_frame_matching(pred, gt, iou_threshold);
  std::map<TrackId, long long> covered;
  for (const auto& frame : fm.matches)
    for (const auto& [gid, pid] : frame) ++covered[gid];
  if (gt.tracks.empty()) return {0.0, 0.0};
  long long mt = 0, ml = 0;
  for (const auto& [gid, t] : gt.tracks) {
    const double cov =
        static_cast<double>(covered[gid]) / static_cast<double>(t.boxes.size());
    if (cov >= 0.8) ++mt;
    if (cov <= 0.2) ++ml;
  }
  const double n = static_cast<double>(gt.tracks.size());
  return {mt / n, ml / n};
}

/// CLEAR metrics plus IDF1 and MT/ML in one report.
inline MotReport clear_mot(const TrajectorySet& pred, const TrajectorySet& gt,
                           double iou_threshold = 0.5) {
  require_same_sequence(pred, gt);
  const auto fm = detail::clear_frame_matching(pred, gt, iou_threshold);
  MotReport r;
  r.FP = fm.fp;
  r.FN = fm.fn;
  r.IDsw = fm.idsw;
  r.gt_count = static_cast<long long>(gt.box_count());
  const double denom = static_cast<double>(std::max<long long>(1, r.gt_count));
  r.MOTA = 1.0 - static_cast<double>(r.FP + r.FN + r.IDsw) / denom;
  r.IDF1 = idf1(pred, gt, iou_threshold);
  std::tie(r.MT, r.ML) = mt_ml(pred, gt, iou_threshold);
  return r;
}

/// Track-level IoU: the per-frame IoU averaged over the union of frames
/// where either track has a box (missing side counts as 0 for that frame).
inline double track_iou(const Trajectory& pred_track, const Trajectory& gt_track) {
  double sum = 0.0;
  long long n = 0;
  auto pi = pred_track.boxes.begin();
  auto gi = gt_track.boxes.begin();
  while (pi != pred_track.boxes.end() || gi != gt_track.boxes.end()) {
    if (gi == gt_track.boxes.end() ||
        (pi != pred_track.boxes.end() && pi->first < gi->first)) {
      ++n;  // prediction only: counts 0
      ++pi;
    } else if (pi == pred_track.boxes.end() || gi->first < pi->first) {
      ++n;  // ground truth only: counts 0
      ++gi;
    } else {
      sum += iou(pi->second, gi->second);
      ++n;
      ++pi;
      ++gi;
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

/// Mean of a predicted track's per-frame scores; the ranking key for AP.
inline double track_score(const Trajectory& t) {
  if (t.scores.empty()) throw MissingScores("predicted track has no scores");
  double s = 0.0;
  for (const auto& [f, v] : t.scores) s += v;
  return s / static_cast<double>(t.scores.size());
}

/// Average precision over whole tracks at one track-IoU threshold:
/// predictions sorted by score, each greedily matched to the unmatched gt
/// track of highest track-IoU above the threshold, 101-point interpolation.
inline double track_ap_at(const TrajectorySet& pred, const TrajectorySet& gt,
                          double thr) {
  std::vector<std::pair<double, TrackId>> ranked;
  for (const auto& [id, t] : pred.tracks) ranked.emplace_back(track_score(t), id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  if (gt.tracks.empty()) return pred.tracks.empty() ? 1.0 : 0.0;

  std::map<TrackId, bool> gt_taken;
  std::vector<bool> is_tp(ranked.size(), false);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& pt = pred.tracks.at(ranked[i].second);
    double best = 0.0;
    TrackId best_gt = -1;
    for (const auto& [gid, gtt] : gt.tracks) {
      if (gt_taken[gid]) continue;
      const double v = track_iou(pt, gtt);
      if (v >= thr && v > best) {
        best = v;
        best_gt = gid;
      }
    }
    if (best_gt >= 0) {
      gt_taken[best_gt] = true;
      is_tp[i] = true;
    }
  }

  std::vector<double> precision(ranked.size()), recall(ranked.size());
  long long tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (is_tp[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(gt.tracks.size());
  }

  double ap = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double best_p = 0.0;
    for (std::size_t i = 0; i < ranked.size(); ++i)
      if (recall[i] >= r) best_p = std::max(best_p, precision[i]);
    ap += best_p;
  }
  return ap / 101.0;
}

/// (AP at track-IoU 0.5, AP at track-IoU 0.75).
inline std::pair<double, double> track_ap(const TrajectorySet& pred,
                                          const TrajectorySet& gt) {
  return {track_ap_at(pred, gt, 0.5), track_ap_at(pred, gt, 0.75)};
}

}  // namespace motkit
