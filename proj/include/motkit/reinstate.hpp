// reinstate.hpp: deciding whether a freshly localized track is a
// reappearance of a terminated one. Covers the age-bounded embedding
// buffer, the k-most-similar distance rule, and the feature vector fed to
// the trained classifier.
#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "motkit/geometry.hpp"
#include "motkit/mlp.hpp"
#include "motkit/track.hpp"

namespace motkit {

struct NoEmbeddings : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class ReinstateDecision { Reinstate, NewTrack };

enum class ReinstateMode { Disabled, ThresholdRule, ClassifierOnline,
                           ClassifierOffline };

struct ReinstateConfig {
  ReinstateMode mode = ReinstateMode::ThresholdRule;
  double distance_threshold = 0.5;
  int k_most_similar = 5;
  double buffer_seconds = 30.0;
};

/// Time-bounded store of per-track appearance vectors, holding both ongoing
/// and terminated tracks. At most one embedding per track per frame; after
/// advance_to(t) no entry is older than round(capacity_seconds * fps).
class EmbeddingBuffer {
 public:
  explicit EmbeddingBuffer(double capacity_seconds = 30.0, double fps = 30.0)
      : horizon_(static_cast<int>(std::lround(capacity_seconds * fps))) {}

  int horizon_frames() const { return horizon_; }

  void add(TrackId id, int frame, const Embedding& e) {
    auto& dq = entries_[id];
    if (!dq.empty() && dq.back().first == frame) return;  // one per frame
    dq.emplace_back(frame, e);
  }

  void advance_to(int current_frame) {
    const int floor_frame = current_frame - horizon_;
    for (auto it = entries_.begin(); it != entries_.end();) {
      auto& dq = it->second;
      while (!dq.empty() && dq.front().first < floor_frame) dq.pop_front();
      if (dq.empty())
        it = entries_.erase(it);
      else
        ++it;
    }
  }

  void erase(TrackId id) { entries_.erase(id); }

  bool has(TrackId id) const { return entries_.count(id) > 0; }

  std::vector<Embedding> embeddings_of(TrackId id) const {
    std::vector<Embedding> out;
    auto it = entries_.find(id);
    if (it == entries_.end()) return out;
    out.reserve(it->second.size());
    for (const auto& [f, e] : it->second) out.push_back(e);
    return out;
  }

 private:
  int horizon_;
  std::map<TrackId, std::deque<std::pair<int, Embedding>>> entries_;
};

/// Mean l2 distance over the k most similar pairs between the two embedding
/// lists, k = min(k_most_similar, number of pairs).
inline double match_distance(const std::vector<Embedding>& pending,
                             const std::vector<Embedding>& candidate,
                             int k_most_similar = 5) {
  if (pending.empty() || candidate.empty())
    throw NoEmbeddings("match_distance needs embeddings on both sides");
  std::vector<double> d;
  d.reserve(pending.size() * candidate.size());
  for (const auto& a : pending)
    for (const auto& b : candidate) d.push_back(l2_distance(a, b));
  const std::size_t k =
      std::min<std::size_t>(static_cast<std::size_t>(k_most_similar), d.size());
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += d[i];
  return s / static_cast<double>(k);
}

inline std::vector<Embedding> embeddings_of(const Track& t) {
  std::vector<Embedding> out;
  out.reserve(t.embeddings.size());
  for (const auto& [f, e] : t.embeddings) out.push_back(e);
  return out;
}

inline double match_distance(const Track& pending, const Track& candidate,
                             int k_most_similar = 5) {
  return match_distance(embeddings_of(pending), embeddings_of(candidate),
                        k_most_similar);
}

/// The plain distance rule: reinstate iff strictly below the threshold.
inline ReinstateDecision decide_threshold(double distance,
                                          const ReinstateConfig& cfg) {
  return distance < cfg.distance_threshold ? ReinstateDecision::Reinstate
                                           : ReinstateDecision::NewTrack;
}

// ---------------------------------------------------------------------------
// Classifier features

struct ReinstateFeatures {
  double embedding_distance = 0.0;
  double center_gap_x = 0.0, center_gap_y = 0.0;    // pixels
  double size_gap_w = 0.0, size_gap_h = 0.0;        // pixels
  double velocity_gap_x = 0.0, velocity_gap_y = 0.0;  // pixels/frame
  int time_gap = 1;                                 // frames, > 0
  double old_confidence = 0.0, new_confidence = 0.0;
};

struct FeatureOptions {
  int k_most_similar = 5;
  int stat_window = 5;             // last-k boxes used for means/velocity
  int pending_prefix_frames = -1;  // > 0: only the first n frames of pending
  // When set, these override the tracks' own embedding histories (the solver
  // passes the age-bounded buffer view for the terminated side).
  const std::vector<Embedding>* pending_embeddings = nullptr;
  const std::vector<Embedding>* old_embeddings = nullptr;
};

namespace detail {

struct BoxStats {
  double cx = 0.0, cy = 0.0;
  double w = 0.0, h = 0.0;
  double vx = 0.0, vy = 0.0;  // mean per-frame center displacement
};

/// Means over the last `window` boxes (optionally restricted to the first
/// `prefix_frames` frames of the track).
inline BoxStats box_stats(const Track& t, int window, int prefix_frames) {
  std::vector<std::pair<int, const BBox*>> boxes;
  for (const auto& [f, b] : t.boxes) {
    if (prefix_frames > 0 &&
        f >= t.first_frame() + prefix_frames)
      break;
    boxes.emplace_back(f, &b);
  }
  const std::size_t n = boxes.size();
  const std::size_t take = std::min<std::size_t>(window, n);
  BoxStats s;
  for (std::size_t i = n - take; i < n; ++i) {
    s.cx += boxes[i].second->cx();
    s.cy += boxes[i].second->cy();
    s.w += boxes[i].second->w;
    s.h += boxes[i].second->h;
  }
  s.cx /= take; s.cy /= take; s.w /= take; s.h /= take;
  if (take >= 2) {
    double vx = 0.0, vy = 0.0;
    for (std::size_t i = n - take + 1; i < n; ++i) {
      const double df = boxes[i].first - boxes[i - 1].first;
      vx += (boxes[i].second->cx() - boxes[i - 1].second->cx()) / df;
      vy += (boxes[i].second->cy() - boxes[i - 1].second->cy()) / df;
    }
    s.vx = vx / (take - 1);
    s.vy = vy / (take - 1);
  }
  return s;
}

}  // namespace detail

/// Pairwise features describing how plausibly `pending` continues
/// `old_track`. Pixel units are kept raw here; classifier_input() applies
/// the scale normalization.
inline ReinstateFeatures extract_features(const Track& pending,
                                          const Track& old_track,
                                          const FeatureOptions& opts = {}) {
  if (pending.empty() || old_track.empty())
    throw std::invalid_argument("extract_features needs non-empty tracks");
  ReinstateFeatures f;
  {
    std::vector<Embedding> pe, oe;
    const std::vector<Embedding>* pp = opts.pending_embeddings;
    const std::vector<Embedding>* op = opts.old_embeddings;
    if (!pp) {
      pe = embeddings_of(pending);
      if (opts.pending_prefix_frames > 0) {
        pe.clear();
        for (const auto& [fr, e] : pending.embeddings)
          if (fr < pending.first_frame() + opts.pending_prefix_frames)
            pe.push_back(e);
      }
      pp = &pe;
    }
    if (!op) {
      oe = embeddings_of(old_track);
      op = &oe;
    }
    f.embedding_distance = match_distance(*pp, *op, opts.k_most_similar);
  }
  const auto ps = detail::box_stats(pending, opts.stat_window,
                                    opts.pending_prefix_frames);
  const auto os = detail::box_stats(old_track, opts.stat_window, -1);
  f.center_gap_x = ps.cx - os.cx;
  f.center_gap_y = ps.cy - os.cy;
  f.size_gap_w = ps.w - os.w;
  f.size_gap_h = ps.h - os.h;
  f.velocity_gap_x = ps.vx - os.vx;
  f.velocity_gap_y = ps.vy - os.vy;
  f.time_gap = pending.first_frame() - old_track.last_frame();
  if (f.time_gap <= 0)
    throw std::invalid_argument("pending track must start after the old one ended");
  f.old_confidence = old_track.confidence();
  f.new_confidence = pending.confidence();
  return f;
}

/// The classifier's input layout: gaps are normalized by the old track's
/// mean box size and the time gap by fps, so training transfers across
/// scales. Must match between training and inference.
inline std::vector<double> classifier_input(const ReinstateFeatures& f,
                                            double old_mean_size, double fps) {
  const double s = old_mean_size > 0.0 ? old_mean_size : 1.0;
  return {f.embedding_distance,
          f.center_gap_x / s,
          f.center_gap_y / s,
          f.size_gap_w / s,
          f.size_gap_h / s,
          f.velocity_gap_x / s,
          f.velocity_gap_y / s,
          static_cast<double>(f.time_gap) / (fps > 0.0 ? fps : 30.0),
          f.old_confidence,
          f.new_confidence};
}

inline constexpr int kClassifierInputDim = 10;

/// Mean (w + h) / 2 over the old track's stat window, the normalization
/// reference for classifier_input.
inline double reference_size(const Track& old_track, int window = 5) {
  const auto s = detail::box_stats(old_track, window, -1);
  return 0.5 * (s.w + s.h);
}

/// Same-track probability from the trained model.
inline double classifier_score(const MlpModel& model,
                               const std::vector<double>& input) {
  return mlp_forward(model, input)[0];
}

/// Reinstate iff the same-track probability strictly exceeds 0.5. A
/// zero-weight network scores exactly 0.5 and therefore starts a new track.
inline ReinstateDecision decide_classifier(const ReinstateFeatures& features,
                                           const MlpModel& model,
                                           double old_mean_size, double fps) {
  const double p =
      classifier_score(model, classifier_input(features, old_mean_size, fps));
  return p > 0.5 ? ReinstateDecision::Reinstate : ReinstateDecision::NewTrack;
}

}  // namespace motkit
