// sim.hpp: deterministic synthetic worlds. People move through a pixel
// arena, enter, leave, cross and get occluded on a script; the provider
// emits ground-truth-consistent cues in noiseless mode and configurably
// corrupted ones otherwise. Every end-to-end claim in the test suite runs
// against these worlds.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "motkit/cues.hpp"
#include "motkit/geometry.hpp"
#include "motkit/track.hpp"

namespace motkit::sim {

struct Interval {
  int person = 0;
  int from = 0;  // inclusive
  int to = 0;    // inclusive
};

struct NoiseConfig {
  double box_jitter = 0.0;          // sigma, pixels, on detections and motion
  double miss_rate = 0.0;           // per detection
  double false_positive_rate = 0.0;  // per frame
  double embedding_noise = 0.0;     // sigma per coordinate
  double visibility_flip_rate = 0.0;  // true "still visible" flipped to 0
  double reappearance_drift = 0.0;  // max prototype shift after an occlusion

  bool any() const {
    return box_jitter > 0.0 || miss_rate > 0.0 || false_positive_rate > 0.0 ||
           embedding_noise > 0.0 || visibility_flip_rate > 0.0 ||
           reappearance_drift > 0.0;
  }
};

/// A straight-line center path walked over the person's presence span.
struct PathSpec {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

struct WorldConfig {
  std::uint64_t seed = 1;
  int n_people = 3;
  int frames = 100;
  double fps = 30.0;
  double arena_w = 1600.0, arena_h = 900.0;
  double speed_min = 1.0, speed_max = 3.5;  // px/frame
  double turn_rate = 0.04;                  // direction-change probability
  double box_w_min = 30.0, box_w_max = 48.0;
  double aspect = 2.2;  // box height = width * aspect
  int embedding_dim = 128;
  double search_ratio = 2.0;  // matcher window the responses respect

  std::map<int, std::pair<int, int>> presence;  // person -> [enter, exit]
  std::map<int, PathSpec> scripted_paths;       // overrides the random walk
  std::vector<Interval> occlusions;          // person fully hidden (no gt box)
  std::vector<Interval> partial_occlusions;  // gt present, detections dropped

  NoiseConfig noise;
  bool useless_responses = false;  // track matcher always answers v = 0
};

namespace detail {

inline Embedding random_unit(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Embedding e(dim);
  double n2 = 0.0;
  for (auto& v : e) {
    v = g(rng);
    n2 += v * v;
  }
  const double n = std::sqrt(n2);
  for (auto& v : e) v /= n;
  return e;
}

struct Person {
  double w = 0.0, h = 0.0;
  int enter = 0, exit = 0;
  std::map<int, BBox> gt_boxes;            // present frames only
  std::vector<std::pair<int, int>> hidden;  // full-occlusion intervals
  std::vector<Embedding> segment_protos;   // one per reappearance segment

  bool present(int f) const { return gt_boxes.count(f) > 0; }

  /// Prototype in effect at frame f: advances one segment per completed
  /// full occlusion.
  const Embedding& proto_at(int f) const {
    std::size_t seg = 0;
    for (const auto& [from, to] : hidden)
      if (f > to) ++seg;
    return segment_protos[std::min(seg, segment_protos.size() - 1)];
  }
};

}  // namespace detail

/// The world and its cue stream. Holds everything precomputed at
/// generate() time; query() only adds the configured noise, drawing from a
/// sequential RNG so identical query sequences give identical cues.
class SimProvider final : public CueProvider {
 public:
  SimProvider(WorldConfig cfg, std::vector<detail::Person> people)
      : cfg_(std::move(cfg)),
        people_(std::move(people)),
        noise_rng_(cfg_.seed ^ 0x9e3779b97f4a7c15ull) {}

  int frame_count() const override { return cfg_.frames; }
  double fps() const override { return cfg_.fps; }
  bool has_embeddings() const override { return true; }

  FrameCues query(int frame,
                  const std::map<TrackId, BBox>& active_targets) override {
    if (frame < 0 || frame >= cfg_.frames)
      throw OutOfBounds("frame " + std::to_string(frame) + " outside [0, " +
                        std::to_string(cfg_.frames) + ")");
    FrameCues cues;
    cues.frame = frame;

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t p = 0; p < people_.size(); ++p) {
      const auto& person = people_[p];
      if (!person.present(frame)) continue;
      if (partially_occluded(static_cast<int>(p), frame)) continue;
      if (cfg_.noise.miss_rate > 0.0 && u01(noise_rng_) < cfg_.noise.miss_rate)
        continue;
      Detection det;
      det.box = jittered(person.gt_boxes.at(frame));
      det.score = 1.0;
      det.embedding = noisy_embedding(person.proto_at(frame));
      cues.detections.push_back(std::move(det));
    }
    if (cfg_.noise.false_positive_rate > 0.0 &&
        u01(noise_rng_) < cfg_.noise.false_positive_rate) {
      Detection fp;
      std::uniform_real_distribution<double> uw(cfg_.box_w_min, cfg_.box_w_max);
      const double w = uw(noise_rng_);
      const double h = w * cfg_.aspect;
      std::uniform_real_distribution<double> ux(0.0, cfg_.arena_w - w);
      std::uniform_real_distribution<double> uy(0.0, cfg_.arena_h - h);
      fp.box = BBox{ux(noise_rng_), uy(noise_rng_), w, h};
      std::uniform_real_distribution<double> us(0.5, 0.9);
      fp.score = us(noise_rng_);
      fp.embedding = detail::random_unit(cfg_.embedding_dim, noise_rng_);
      cues.detections.push_back(std::move(fp));
    }

    for (const auto& [handle, target] : active_targets)
      cues.responses[handle] = respond(frame, target);
    return cues;
  }

  const std::vector<detail::Person>& people() const { return people_; }

 private:
  bool partially_occluded(int person, int frame) const {
    for (const auto& iv : cfg_.partial_occlusions)
      if (iv.person == person && frame >= iv.from && frame <= iv.to)
        return true;
    return false;
  }

  BBox jittered(const BBox& b) {
    if (cfg_.noise.box_jitter <= 0.0) return b;
    std::normal_distribution<double> g(0.0, cfg_.noise.box_jitter);
    const double dw = g(noise_rng_) * 0.5;
    const double dh = g(noise_rng_) * 0.5;
    return BBox{b.x + g(noise_rng_), b.y + g(noise_rng_),
                std::max(1.0, b.w + dw), std::max(1.0, b.h + dh)};
  }

  Embedding noisy_embedding(const Embedding& proto) {
    if (cfg_.noise.embedding_noise <= 0.0) return proto;
    std::normal_distribution<double> g(0.0, cfg_.noise.embedding_noise);
    Embedding e = proto;
    for (auto& v : e) v += g(noise_rng_);
    return e;
  }

  /// Match the queried box to the person it was following at the previous
  /// frame; report whether that person is still inside the search window
  /// and, if so, the exact (optionally jittered) motion towards them.
  TrackResponse respond(int frame, const BBox& target) {
    TrackResponse r;
    if (cfg_.useless_responses) return r;  // v = 0
    int best_person = -1;
    double best_iou = 0.1;  // below this the target follows nobody
    for (std::size_t p = 0; p < people_.size(); ++p) {
      auto it = people_[p].gt_boxes.find(frame - 1);
      if (it == people_[p].gt_boxes.end()) continue;
      const double v = iou(target, it->second);
      if (v > best_iou) {
        best_iou = v;
        best_person = static_cast<int>(p);
      }
    }
    if (best_person < 0) return r;
    const auto& person = people_[best_person];
    auto nit = person.gt_boxes.find(frame);
    if (nit == person.gt_boxes.end()) return r;  // gone or hidden: v = 0
    const BBox& next = nit->second;
    const BBox region = search_region(target, cfg_.search_ratio);
    const bool inside = next.cx() >= region.x && next.cx() <= region.right() &&
                        next.cy() >= region.y && next.cy() <= region.bottom();
    if (!inside) return r;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (cfg_.noise.visibility_flip_rate > 0.0 &&
        u01(noise_rng_) < cfg_.noise.visibility_flip_rate)
      return r;
    r.visibility = 1.0;
    r.motion = encode_motion(target, jittered(next));
    return r;
  }

  WorldConfig cfg_;
  std::vector<detail::Person> people_;
  std::mt19937_64 noise_rng_;
};

struct Simulation {
  TrajectorySet gt;
  SimProvider provider;
};

/// Build the world: sizes, paths, presence and occlusions are all resolved
/// here, deterministically from the seed.
inline Simulation generate(const WorldConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<detail::Person> people(cfg.n_people);

  for (int p = 0; p < cfg.n_people; ++p) {
    auto& person = people[p];
    std::uniform_real_distribution<double> uw(cfg.box_w_min, cfg.box_w_max);
    person.w = uw(rng);
    person.h = person.w * cfg.aspect;
    person.enter = 0;
    person.exit = cfg.frames - 1;
    if (auto it = cfg.presence.find(p); it != cfg.presence.end()) {
      person.enter = std::max(0, it->second.first);
      person.exit = std::min(cfg.frames - 1, it->second.second);
    }
    for (const auto& iv : cfg.occlusions)
      if (iv.person == p) person.hidden.emplace_back(iv.from, iv.to);
    std::sort(person.hidden.begin(), person.hidden.end());

    // Centers along a scripted line or a bounded random walk.
    std::map<int, std::pair<double, double>> centers;
    const auto path_it = cfg.scripted_paths.find(p);
    if (path_it != cfg.scripted_paths.end()) {
      const auto& path = path_it->second;
      const int span = std::max(1, person.exit - person.enter);
      for (int f = person.enter; f <= person.exit; ++f) {
        const double a = static_cast<double>(f - person.enter) / span;
        centers[f] = {path.x0 + a * (path.x1 - path.x0),
                      path.y0 + a * (path.y1 - path.y0)};
      }
    } else {
      const double half_w = person.w / 2.0, half_h = person.h / 2.0;
      std::uniform_real_distribution<double> ux(half_w, cfg.arena_w - half_w);
      std::uniform_real_distribution<double> uy(half_h, cfg.arena_h - half_h);
      std::uniform_real_distribution<double> uspeed(cfg.speed_min, cfg.speed_max);
      std::uniform_real_distribution<double> uang(0.0, 2.0 * std::numbers::pi);
      double x = ux(rng), y = uy(rng);
      double speed = uspeed(rng), ang = uang(rng);
      for (int f = person.enter; f <= person.exit; ++f) {
        centers[f] = {x, y};
        if (u01(rng) < cfg.turn_rate)
          ang += (u01(rng) - 0.5) * std::numbers::pi;
        x += speed * std::cos(ang);
        y += speed * std::sin(ang);
        if (x < half_w) { x = 2 * half_w - x; ang = std::numbers::pi - ang; }
        if (x > cfg.arena_w - half_w) { x = 2 * (cfg.arena_w - half_w) - x; ang = std::numbers::pi - ang; }
        if (y < half_h) { y = 2 * half_h - y; ang = -ang; }
        if (y > cfg.arena_h - half_h) { y = 2 * (cfg.arena_h - half_h) - y; ang = -ang; }
      }
    }

    for (const auto& [f, c] : centers) {
      bool hidden = false;
      for (const auto& [from, to] : person.hidden)
        if (f >= from && f <= to) hidden = true;
      if (hidden) continue;
      person.gt_boxes[f] =
          BBox{c.first - person.w / 2.0, c.second - person.h / 2.0, person.w,
               person.h};
    }

    person.segment_protos.push_back(detail::random_unit(cfg.embedding_dim, rng));
    for (std::size_t k = 0; k < person.hidden.size(); ++k) {
      Embedding next = person.segment_protos.back();
      if (cfg.noise.reappearance_drift > 0.0) {
        const double mag = u01(rng) * cfg.noise.reappearance_drift;
        std::normal_distribution<double> g(0.0, 1.0);
        double n2 = 0.0;
        Embedding dir(next.size());
        for (auto& v : dir) {
          v = g(rng);
          n2 += v * v;
        }
        const double n = std::sqrt(n2);
        for (std::size_t i = 0; i < next.size(); ++i) next[i] += mag * dir[i] / n;
        double m2 = 0.0;
        for (double v : next) m2 += v * v;
        const double m = std::sqrt(m2);
        for (auto& v : next) v /= m;
      }
      person.segment_protos.push_back(std::move(next));
    }
  }

  Simulation out{TrajectorySet{}, SimProvider(cfg, people)};
  out.gt.sequence_length = cfg.frames;
  out.gt.fps = cfg.fps;
  for (int p = 0; p < cfg.n_people; ++p) {
    if (people[p].gt_boxes.empty()) continue;
    Trajectory t;
    t.boxes = people[p].gt_boxes;
    for (const auto& [f, b] : t.boxes) t.scores[f] = 1.0;
    out.gt.tracks[p + 1] = std::move(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario library

/// The noisy crowded benchmark used for the component-ordering studies.
/// Occlusion intervals are derived from the seed; noise makes the plain
/// distance rule fall short of the trained reinstater.
inline WorldConfig benchmark_config(std::uint64_t seed) {
  WorldConfig c;
  c.seed = seed;
  c.n_people = 20;
  c.frames = 360;
  c.arena_w = 1900.0;
  c.arena_h = 1100.0;
  c.box_w_min = 28;
  c.box_w_max = 44;
  c.noise.box_jitter = 1.0;
  c.noise.miss_rate = 0.06;
  c.noise.false_positive_rate = 0.05;
  c.noise.embedding_noise = 0.02;
  c.noise.visibility_flip_rate = 0.004;
  c.noise.reappearance_drift = 0.8;

  std::mt19937_64 rng(seed * 0x2545f4914f6cdd1dull + 1);
  std::uniform_int_distribution<int> istart(40, c.frames - 120);
  std::uniform_int_distribution<int> ifull(35, 90);
  std::uniform_int_distribution<int> ipart(10, 25);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int p = 0; p < c.n_people; ++p) {
    if (u01(rng) < 0.55) {  // full occlusion with reappearance
      const int from = istart(rng);
      c.occlusions.push_back(Interval{p, from, std::min(c.frames - 40, from + ifull(rng))});
    } else if (u01(rng) < 0.6) {  // partial occlusion: detections starve
      const int from = istart(rng);
      c.partial_occlusions.push_back(Interval{p, from, std::min(c.frames - 10, from + ipart(rng))});
    }
  }
  return c;
}

/// Named worlds covering the qualitative cases the engine must handle:
/// crossing people, partial and full occlusion, long-gap reappearance with
/// appearance drift, the id-shuffle stream with useless track responses,
/// and a crowded scene.
inline std::map<std::string, WorldConfig> scenario_library() {
  std::map<std::string, WorldConfig> lib;

  {
    WorldConfig c;
    c.seed = 11;
    c.n_people = 2;
    c.frames = 120;
    c.arena_w = 800;
    c.arena_h = 600;
    c.box_w_min = c.box_w_max = 40.0;
    c.scripted_paths[0] = PathSpec{80, 300, 720, 300};
    c.scripted_paths[1] = PathSpec{720, 322, 80, 322};
    lib["crossing"] = c;
  }
  {
    WorldConfig c;
    c.seed = 12;
    c.n_people = 3;
    c.frames = 150;
    c.partial_occlusions.push_back(Interval{0, 50, 80});
    lib["partial-occlusion"] = c;
  }
  {
    WorldConfig c;
    c.seed = 13;
    c.n_people = 3;
    c.frames = 180;
    c.occlusions.push_back(Interval{0, 60, 95});  // > 1 s at 30 fps
    lib["full-occlusion"] = c;
  }
  {
    WorldConfig c;
    c.seed = 14;
    c.n_people = 2;
    c.frames = 300;
    c.occlusions.push_back(Interval{0, 60, 200});
    c.noise.reappearance_drift = 0.7;  // appearance changes across the gap
    lib["long-gap"] = c;
  }
  {
    WorldConfig c;
    c.seed = 15;
    c.n_people = 5;
    c.frames = 120;
    c.useless_responses = true;
    lib["id-shuffle"] = c;
  }
  {
    WorldConfig c;
    c.seed = 16;
    c.n_people = 32;
    c.frames = 200;
    c.arena_w = 2400;
    c.arena_h = 1400;
    c.box_w_min = 24;
    c.box_w_max = 40;
    lib["crowded"] = c;
  }
  lib["crowded-occlusion"] = benchmark_config(17);
  return lib;
}

/// Named groups of worlds for training the reinstatement classifier.
/// "default" draws from the same distribution as the noisy benchmark (other
/// seeds); "separable" has clean appearance so the pair labels are
/// trivially recoverable from the embedding distance alone.
inline std::vector<WorldConfig> training_set(const std::string& name) {
  std::vector<WorldConfig> out;
  if (name == "default") {
    for (std::uint64_t s = 101; s <= 106; ++s)
      out.push_back(benchmark_config(s));
  } else if (name == "separable") {
    for (std::uint64_t s = 201; s <= 203; ++s) {
      WorldConfig c = benchmark_config(s);
      c.noise = NoiseConfig{};
      c.noise.miss_rate = 0.02;  // still produces short broken tracklets
      out.push_back(c);
    }
  }
  return out;
}

/// Ground truth with its identities relabelled at a few interior cut
/// points: detection-perfect, identity-poor. Keeps MOTA near 1 while every
/// relabelled track overlaps any single true identity for only a fraction
/// of its span, sending track-level AP towards 0.
inline TrajectorySet id_shuffle_prediction(const TrajectorySet& gt,
                                           int cuts = 2) {
  TrajectorySet pred;
  pred.sequence_length = gt.sequence_length;
  pred.fps = gt.fps;
  std::vector<TrackId> ids;
  for (const auto& [id, t] : gt.tracks) ids.push_back(id);
  const int n = static_cast<int>(ids.size());
  if (n == 0) return pred;
  for (int i = 0; i < n; ++i) {
    const auto& src = gt.tracks.at(ids[i]);
    for (const auto& [f, b] : src.boxes) {
      const int segment =
          std::min(cuts, f * (cuts + 1) / std::max(1, gt.sequence_length));
      const TrackId out_id = ids[(i + segment) % n];
      pred.tracks[out_id].boxes[f] = b;
      pred.tracks[out_id].scores[f] = 1.0;
    }
  }
  return pred;
}

}  // namespace motkit::sim
