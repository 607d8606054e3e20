// cues.hpp: per-frame tracking cues and the provider contract that feeds
// the online solver. Providers stand in for the detection / track / re-id
// branches of a tracking network; anything that can answer query() can
// drive the solver.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "motkit/geometry.hpp"
#include "motkit/track.hpp"

namespace motkit {

struct Detection {
  BBox box;
  double score = 0.0;  // in [0,1]
  std::optional<Embedding> embedding;
};

/// What the track matcher reports for one queried target: is it still
/// present in its search region, and where did it move.
struct TrackResponse {
  Visibility visibility = 0.0;
  MotionDelta motion;
};

struct FrameCues {
  int frame = 0;
  std::vector<Detection> detections;
  std::map<TrackId, TrackResponse> responses;
};

struct OutOfBounds : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// A cue source for one sequence. Stateful and single-sequence: one
/// instance per sequence, queried strictly frame by frame by one solver.
class CueProvider {
 public:
  virtual ~CueProvider() = default;

  virtual int frame_count() const = 0;
  virtual double fps() const = 0;

  /// True when detections carry appearance embeddings (re-id usable).
  virtual bool has_embeddings() const = 0;

  /// Cues for `frame`: all detections plus one TrackResponse per entry of
  /// `active_targets` (the solver's current box for each track it wants
  /// followed). Throws OutOfBounds past the end of the sequence.
  virtual FrameCues query(int frame,
                          const std::map<TrackId, BBox>& active_targets) = 0;
};

}  // namespace motkit
