// solver.hpp: the online track lifecycle machine. Each frame it continues
// tracks from their matcher responses, terminates the ones that lost their
// target, merges detections into continued tracks, starts pending tracks
// from leftover detections, and routes pendings through reinstatement once
// they have been observed long enough.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "motkit/cues.hpp"
#include "motkit/geometry.hpp"
#include "motkit/mlp.hpp"
#include "motkit/reinstate.hpp"
#include "motkit/track.hpp"

namespace motkit {

struct FrameGap : std::logic_error {
  using std::logic_error::logic_error;
};
struct MissingEmbedding : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double iou_merge_threshold = 0.3;   // detection/track agreement gate
  double visibility_threshold = 0.3;  // below: terminate
  double detection_score_threshold = 0.5;  // below: never start a track
  double search_ratio = 2.0;
  int pending_frames = 5;      // probation length before the reinstate call
  double duplicate_iou = 0.9;  // two live tracks above this collapse to one
  ReinstateConfig reinstate;

  /// Siamese: continue tracks from matcher responses. ReidOnly: ignore
  /// responses and associate per frame by embedding distance alone.
  enum class Association { Siamese, ReidOnly };
  Association association = Association::Siamese;
  double reid_assoc_threshold = 1.0;  // ReidOnly: max distance to continue

  const MlpModel* classifier = nullptr;  // required for classifier modes
};

/// Single-sequence solver state. Copyable by value; one owner mutates it
/// frame by frame via step().
class Solver {
 public:
  explicit Solver(SolverConfig cfg, double fps = 30.0)
      : cfg_(std::move(cfg)),
        fps_(fps),
        buffer_(cfg_.reinstate.buffer_seconds, fps) {
    if ((cfg_.reinstate.mode == ReinstateMode::ClassifierOnline ||
         cfg_.reinstate.mode == ReinstateMode::ClassifierOffline) &&
        cfg_.classifier == nullptr)
      throw std::invalid_argument("classifier mode needs a model");
  }

  int current_frame() const { return current_frame_; }

  /// Boxes the provider should produce responses for at the next frame:
  /// every Active confirmed track and every live pending track, keyed by
  /// the solver's internal handle.
  std::map<TrackId, BBox> active_targets() const {
    std::map<TrackId, BBox> out;
    for (const auto& e : roster_)
      if (live(e)) out[e.handle] = e.track.boxes.rbegin()->second;
    return out;
  }

  void step(const FrameCues& cues) {
    if (cues.frame != current_frame_ + 1)
      throw FrameGap("expected frame " + std::to_string(current_frame_ + 1) +
                     ", got " + std::to_string(cues.frame));
    const int f = cues.frame;
    buffer_.advance_to(f);
    age_out_terminated(f);

    std::vector<std::size_t> continued;
    std::vector<bool> det_used(cues.detections.size(), false);

    if (cfg_.association == SolverConfig::Association::Siamese) {
      continue_from_responses(f, cues, continued);
      merge_detections(f, cues, continued, det_used);
    } else {
      associate_by_embedding(f, cues, continued, det_used);
    }
    spawn_pending(f, cues, continued, det_used);
    suppress_duplicates(f);
    resolve_ready_pendings(f, /*at_sequence_end=*/false);
    current_frame_ = f;
  }

  /// Resolve what is still pending, close every track and emit the
  /// trajectories. Offline-classifier mode runs its stitching post-pass
  /// here.
  TrajectorySet finish() {
    resolve_ready_pendings(current_frame_, /*at_sequence_end=*/true);
    if (cfg_.reinstate.mode == ReinstateMode::ClassifierOffline)
      offline_stitch();
    TrajectorySet out;
    out.sequence_length = current_frame_ + 1;
    out.fps = fps_;
    for (auto& e : roster_) {
      if (e.discarded || e.track.id < 0 || e.merged_into >= 0 ||
          e.track.empty())
        continue;
      e.track.state = TrackState::Finished;
      Trajectory t;
      t.boxes = e.track.boxes;
      for (const auto& [fr, v] : e.track.visibilities) t.scores[fr] = v;
      out.tracks[e.track.id] = std::move(t);
    }
    if (cfg_.reinstate.mode == ReinstateMode::ClassifierOffline)
      out = renumber_dense(std::move(out));
    return out;
  }

  // Test introspection.
  struct Entry {
    Track track;
    TrackId handle = -1;
    bool pending = false;
    bool discarded = false;
    long long merged_into = -1;  // offline stitching target handle
    int decision_frame = -1;     // offline: when the online call would happen
  };
  const std::vector<Entry>& roster() const { return roster_; }
  const EmbeddingBuffer& buffer() const { return buffer_; }
  TrackId next_public_id() const { return next_public_id_; }

 private:
  static bool live(const Entry& e) {
    return !e.discarded && e.merged_into < 0 &&
           e.track.state == TrackState::Active && !e.track.empty();
  }

  Entry* by_handle(TrackId h) {
    for (auto& e : roster_)
      if (e.handle == h) return &e;
    return nullptr;
  }

  void age_out_terminated(int f) {
    for (auto& e : roster_) {
      if (e.discarded || e.track.state != TrackState::Terminated) continue;
      if (e.track.empty() ||
          e.track.last_frame() < f - buffer_.horizon_frames())
        e.track.state = TrackState::Finished;
    }
  }

  void continue_from_responses(int f, const FrameCues& cues,
                               std::vector<std::size_t>& continued) {
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      auto& e = roster_[i];
      if (!live(e)) continue;
      auto rit = cues.responses.find(e.handle);
      if (rit == cues.responses.end())
        throw std::logic_error("provider returned no response for track " +
                               std::to_string(e.handle));
      const double v = std::clamp(rit->second.visibility, 0.0, 1.0);
      if (v >= cfg_.visibility_threshold) {
        const BBox prev = e.track.boxes.rbegin()->second;
        place(e, f, decode_motion(prev, rit->second.motion), v);
        continued.push_back(i);
      } else {
        terminate(e, f);
      }
    }
  }

  /// Greedy IoU merge, best overlap first; ties prefer the higher-scoring
  /// detection, then the older track. The detection box replaces the
  /// regressed one.
  void merge_detections(int f, const FrameCues& cues,
                        const std::vector<std::size_t>& continued,
                        std::vector<bool>& det_used) {
    struct Cand {
      double ov;
      std::size_t trk;
      std::size_t det;
    };
    std::vector<Cand> cands;
    for (std::size_t ti : continued) {
      const BBox& tb = roster_[ti].track.boxes.at(f);
      for (std::size_t d = 0; d < cues.detections.size(); ++d) {
        const double ov = iou(tb, cues.detections[d].box);
        if (ov > cfg_.iou_merge_threshold) cands.push_back({ov, ti, d});
      }
    }
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
      if (a.ov != b.ov) return a.ov > b.ov;
      const double sa = cues.detections[a.det].score;
      const double sb = cues.detections[b.det].score;
      if (sa != sb) return sa > sb;
      return roster_[a.trk].handle < roster_[b.trk].handle;
    });
    std::vector<bool> trk_done(roster_.size(), false);
    for (const Cand& c : cands) {
      if (trk_done[c.trk] || det_used[c.det]) continue;
      trk_done[c.trk] = true;
      det_used[c.det] = true;
      auto& e = roster_[c.trk];
      e.track.boxes[f] = cues.detections[c.det].box;
      take_embedding(e, f, cues.detections[c.det]);
    }
  }

  /// ReidOnly association: gate detections to each track's search region,
  /// then greedily link by ascending embedding distance. Tracks with no
  /// accepted detection terminate.
  void associate_by_embedding(int f, const FrameCues& cues,
                              std::vector<std::size_t>& continued,
                              std::vector<bool>& det_used) {
    struct Cand {
      double dist;
      std::size_t trk;
      std::size_t det;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      auto& e = roster_[i];
      if (!live(e) || e.track.embeddings.empty()) continue;
      const BBox prev = e.track.boxes.rbegin()->second;
      const BBox region = search_region(prev, cfg_.search_ratio);
      const Embedding& ref = e.track.embeddings.back().second;
      for (std::size_t d = 0; d < cues.detections.size(); ++d) {
        const auto& det = cues.detections[d];
        if (!det.embedding) throw MissingEmbedding("reid association needs embeddings");
        const double cx = det.box.cx(), cy = det.box.cy();
        if (cx < region.x || cx > region.right() || cy < region.y ||
            cy > region.bottom())
          continue;
        const double dist = l2_distance(ref, *det.embedding);
        if (dist <= cfg_.reid_assoc_threshold) cands.push_back({dist, i, d});
      }
    }
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
      if (a.dist != b.dist) return a.dist < b.dist;
      if (a.trk != b.trk) return roster_[a.trk].handle < roster_[b.trk].handle;
      return a.det < b.det;
    });
    std::vector<bool> trk_done(roster_.size(), false);
    for (const Cand& c : cands) {
      if (trk_done[c.trk] || det_used[c.det]) continue;
      trk_done[c.trk] = true;
      det_used[c.det] = true;
      auto& e = roster_[c.trk];
      place(e, f, cues.detections[c.det].box, cues.detections[c.det].score);
      take_embedding(e, f, cues.detections[c.det]);
      continued.push_back(c.trk);
    }
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      auto& e = roster_[i];
      if (!live(e)) continue;
      if (!trk_done[i] && (e.track.empty() || e.track.boxes.rbegin()->first != f))
        terminate(e, f);
    }
  }

  /// Leftover detections that are confident enough and not sitting on any
  /// continued track become pending tracks.
  void spawn_pending(int f, const FrameCues& cues,
                     const std::vector<std::size_t>& continued,
                     std::vector<bool>& det_used) {
    for (std::size_t d = 0; d < cues.detections.size(); ++d) {
      if (det_used[d]) continue;
      const auto& det = cues.detections[d];
      if (det.score < cfg_.detection_score_threshold) continue;
      bool covered = false;
      for (std::size_t ti : continued) {
        if (iou(roster_[ti].track.boxes.at(f), det.box) >
            cfg_.iou_merge_threshold) {
          covered = true;
          break;
        }
      }
      if (covered) continue;
      Entry e;
      e.handle = next_handle_++;
      e.pending = true;
      e.track.state = TrackState::Active;
      place(e, f, det.box, det.score);
      take_embedding(e, f, det);
      roster_.push_back(std::move(e));
    }
  }

  /// No two live tracks may sit on (nearly) the same box. Pendings lose to
  /// confirmed tracks; otherwise the lower-confidence one goes.
  void suppress_duplicates(int f) {
    std::vector<std::size_t> at_frame;
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      const auto& e = roster_[i];
      if (live(e) && e.track.boxes.count(f)) at_frame.push_back(i);
    }
    for (std::size_t a = 0; a < at_frame.size(); ++a) {
      for (std::size_t b = a + 1; b < at_frame.size(); ++b) {
        auto& ea = roster_[at_frame[a]];
        auto& eb = roster_[at_frame[b]];
        if (!live(ea) || !live(eb)) continue;
        if (!ea.track.boxes.count(f) || !eb.track.boxes.count(f)) continue;
        if (iou(ea.track.boxes.at(f), eb.track.boxes.at(f)) <=
            cfg_.duplicate_iou)
          continue;
        Entry* loser = nullptr;
        if (ea.pending != eb.pending) {
          loser = ea.pending ? &ea : &eb;
        } else if (ea.track.confidence() != eb.track.confidence()) {
          loser = ea.track.confidence() < eb.track.confidence() ? &ea : &eb;
        } else {
          loser = ea.handle > eb.handle ? &ea : &eb;
        }
        if (loser->pending) {
          loser->discarded = true;
          buffer_.erase(loser->handle);
        } else {
          drop_frame(*loser, f);
          terminate(*loser, f);
        }
      }
    }
  }

  bool has_eligible_candidates(const Entry& pending) const {
    for (const auto& e : roster_) {
      if (eligible_candidate(e, pending)) return true;
    }
    return false;
  }

  bool eligible_candidate(const Entry& cand, const Entry& pending) const {
    return !cand.discarded && cand.merged_into < 0 && !cand.pending &&
           cand.track.state == TrackState::Terminated && !cand.track.empty() &&
           cand.track.last_frame() < pending.track.first_frame() &&
           buffer_.has(cand.handle);
  }

  void resolve_ready_pendings(int f, bool at_sequence_end) {
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      auto& e = roster_[i];
      if (!e.pending || e.discarded) continue;
      const bool died = e.track.state == TrackState::Terminated;
      const bool seasoned =
          !e.track.empty() &&
          static_cast<int>(e.track.boxes.size()) >= cfg_.pending_frames;
      const bool no_candidates = !has_eligible_candidates(e);
      if (died || seasoned || at_sequence_end || no_candidates)
        resolve_pending(i, f);
    }
  }

  void resolve_pending(std::size_t idx, int f) {
    Entry& p = roster_[idx];
    p.pending = false;
    p.decision_frame = f;
    if (cfg_.reinstate.mode == ReinstateMode::Disabled ||
        cfg_.reinstate.mode == ReinstateMode::ClassifierOffline ||
        p.track.embeddings.empty()) {
      confirm_new(p);
      return;
    }
    const std::vector<Embedding> pending_embs = embeddings_of(p.track);
    TrackId best_handle = -1;
    if (cfg_.reinstate.mode == ReinstateMode::ThresholdRule) {
      double best_dist = 0.0;
      int best_term_at = -1;
      for (const auto& c : roster_) {
        if (!eligible_candidate(c, p)) continue;
        const double d =
            match_distance(pending_embs, buffer_.embeddings_of(c.handle),
                           cfg_.reinstate.k_most_similar);
        const int term_at = c.track.terminated_at.value_or(-1);
        const bool better =
            best_handle < 0 || d < best_dist ||
            (d == best_dist && term_at > best_term_at);
        if (better) {
          best_handle = c.handle;
          best_dist = d;
          best_term_at = term_at;
        }
      }
      if (best_handle >= 0 &&
          decide_threshold(best_dist, cfg_.reinstate) ==
              ReinstateDecision::Reinstate) {
        reinstate_into(best_handle, idx);
        return;
      }
    } else {  // ClassifierOnline
      double best_score = 0.5;  // strict >: anything at 0.5 starts fresh
      for (const auto& c : roster_) {
        if (!eligible_candidate(c, p)) continue;
        FeatureOptions opts;
        opts.k_most_similar = cfg_.reinstate.k_most_similar;
        opts.pending_prefix_frames = cfg_.pending_frames;
        const auto old_embs = buffer_.embeddings_of(c.handle);
        opts.old_embeddings = &old_embs;
        const auto feats = extract_features(p.track, c.track, opts);
        const double score = classifier_score(
            *cfg_.classifier,
            classifier_input(feats, reference_size(c.track), fps_));
        if (score > best_score) {
          best_score = score;
          best_handle = c.handle;
        }
      }
      if (best_handle >= 0) {
        reinstate_into(best_handle, idx);
        return;
      }
    }
    confirm_new(roster_[idx]);
  }

  void confirm_new(Entry& e) { e.track.id = next_public_id_++; }

  void reinstate_into(TrackId target_handle, std::size_t pending_idx) {
    Entry& p = roster_[pending_idx];
    Entry& t = *by_handle(target_handle);
    t.track.state =
        p.track.state == TrackState::Terminated ? TrackState::Terminated
                                                : TrackState::Active;
    if (p.track.terminated_at) t.track.terminated_at = p.track.terminated_at;
    for (const auto& [fr, b] : p.track.boxes) t.track.boxes[fr] = b;
    for (const auto& [fr, v] : p.track.visibilities)
      t.track.visibilities[fr] = v;
    for (const auto& [fr, emb] : p.track.embeddings) {
      t.track.embeddings.emplace_back(fr, emb);
      buffer_.add(t.handle, fr, emb);
    }
    t.track.confidence_sum += p.track.confidence_sum;
    t.track.confidence_count += p.track.confidence_count;
    buffer_.erase(p.handle);
    p.discarded = true;
  }

  /// Offline post-pass: every pending became its own track during the run;
  /// now revisit each decision with full-track features and stitch accepted
  /// pairs, earliest new track first so chains of gaps merge transitively.
  void offline_stitch() {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < roster_.size(); ++i) {
      const auto& e = roster_[i];
      if (!e.discarded && e.track.id >= 0 && !e.track.empty())
        order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return roster_[a].track.first_frame() < roster_[b].track.first_frame();
    });
    const int horizon = buffer_.horizon_frames();
    for (std::size_t oi : order) {
      Entry& p = roster_[oi];
      if (p.merged_into >= 0 || p.track.embeddings.empty()) continue;
      const int df = p.track.first_frame() + cfg_.pending_frames;
      double best_score = 0.5;
      long long best = -1;
      for (std::size_t cj : order) {
        Entry& c = roster_[cj];
        if (c.handle == p.handle || c.merged_into >= 0) continue;
        if (c.track.empty() ||
            c.track.last_frame() >= p.track.first_frame())
          continue;
        std::vector<Embedding> old_embs;
        for (const auto& [fr, emb] : c.track.embeddings)
          if (fr >= df - horizon) old_embs.push_back(emb);
        if (old_embs.empty()) continue;
        FeatureOptions opts;
        opts.k_most_similar = cfg_.reinstate.k_most_similar;
        opts.old_embeddings = &old_embs;
        const auto feats = extract_features(p.track, c.track, opts);
        const double score = classifier_score(
            *cfg_.classifier,
            classifier_input(feats, reference_size(c.track), fps_));
        if (score > best_score) {
          best_score = score;
          best = c.handle;
        }
      }
      if (best >= 0) {
        Entry& t = *by_handle(best);
        for (const auto& [fr, b] : p.track.boxes) t.track.boxes[fr] = b;
        for (const auto& [fr, v] : p.track.visibilities)
          t.track.visibilities[fr] = v;
        for (const auto& [fr, emb] : p.track.embeddings)
          t.track.embeddings.emplace_back(fr, emb);
        t.track.confidence_sum += p.track.confidence_sum;
        t.track.confidence_count += p.track.confidence_count;
        p.merged_into = t.handle;
      }
    }
  }

  static TrajectorySet renumber_dense(TrajectorySet set) {
    TrajectorySet out;
    out.sequence_length = set.sequence_length;
    out.fps = set.fps;
    TrackId next = 1;
    for (auto& [id, t] : set.tracks) out.tracks[next++] = std::move(t);
    return out;
  }

  void place(Entry& e, int f, const BBox& box, double v) {
    e.track.boxes[f] = box;
    e.track.visibilities[f] = v;
    e.track.observe_visibility(v);
  }

  void drop_frame(Entry& e, int f) {
    e.track.boxes.erase(f);
    e.track.visibilities.erase(f);
  }

  void terminate(Entry& e, int f) {
    e.track.state = TrackState::Terminated;
    e.track.terminated_at = f;
  }

  void take_embedding(Entry& e, int f, const Detection& det) {
    if (!det.embedding) return;
    e.track.embeddings.emplace_back(f, *det.embedding);
    buffer_.add(e.handle, f, *det.embedding);
  }

  SolverConfig cfg_;
  double fps_;
  EmbeddingBuffer buffer_;
  std::vector<Entry> roster_;
  TrackId next_handle_ = 0;
  TrackId next_public_id_ = 1;
  int current_frame_ = -1;
};

/// One forward pass over the whole sequence: strictly online, one query and
/// one step per frame.
inline TrajectorySet run(CueProvider& provider, const SolverConfig& cfg) {
  if ((cfg.association == SolverConfig::Association::ReidOnly) &&
      !provider.has_embeddings())
    throw MissingEmbedding("reid-only association needs an embedding source");
  Solver solver(cfg, provider.fps());
  for (int f = 0; f < provider.frame_count(); ++f)
    solver.step(provider.query(f, solver.active_targets()));
  return solver.finish();
}

}  // namespace motkit
