// track.hpp: track lifecycle records and whole-sequence trajectory sets.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "motkit/geometry.hpp"

namespace motkit {

using TrackId = std::int64_t;

enum class TrackState { Active, Terminated, Finished };

/// One tracked identity: per-frame boxes and visibilities, appearance
/// history, and a running confidence (mean of observed visibilities).
/// Frames in `boxes` are strictly increasing by construction of the solver.
struct Track {
  TrackId id = -1;
  TrackState state = TrackState::Active;
  std::map<int, BBox> boxes;             // frame -> box
  std::map<int, Visibility> visibilities;  // frame -> response score
  std::vector<std::pair<int, Embedding>> embeddings;  // (frame, vector)
  std::optional<int> terminated_at;

  double confidence_sum = 0.0;
  int confidence_count = 0;

  /// Running mean of the visibility scores observed so far (0 if none).
  double confidence() const {
    return confidence_count > 0 ? confidence_sum / confidence_count : 0.0;
  }

  void observe_visibility(double v) {
    confidence_sum += v;
    ++confidence_count;
  }

  int first_frame() const { return boxes.begin()->first; }
  int last_frame() const { return boxes.rbegin()->first; }
  bool empty() const { return boxes.empty(); }
};

/// Per-frame boxes of a single identity, with optional per-frame scores.
struct Trajectory {
  std::map<int, BBox> boxes;
  std::map<int, double> scores;

  int first_frame() const { return boxes.begin()->first; }
  int last_frame() const { return boxes.rbegin()->first; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Ground-truth or predicted tracks for one whole sequence.
struct TrajectorySet {
  std::map<TrackId, Trajectory> tracks;
  int sequence_length = 0;  // frames, 0-based indices in [0, sequence_length)
  double fps = 30.0;

  std::size_t box_count() const {
    std::size_t n = 0;
    for (const auto& [id, t] : tracks) n += t.boxes.size();
    return n;
  }

  friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;
};

}  // namespace motkit
